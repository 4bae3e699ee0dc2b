#include "doctest.h"

#include "disen/tensor.hpp"

using disen::Tensor;

TEST_CASE("tensor construction and indexing") {
    Tensor t({2, 3});
    CHECK(t.ndim() == 2);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.numel() == 6);
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

    t.at(1, 2) = 5.0;
    CHECK(t[5] == 5.0);  // row-major: (1,2) -> 1*3+2

    Tensor img({3, 4, 5});
    img.at(2, 3, 4) = 7.0;
    CHECK(img[img.numel() - 1] == 7.0);
    CHECK(img.channels() == 3);
    CHECK(img.height() == 4);
    CHECK(img.width() == 5);

    Tensor w({2, 3, 3, 3});
    w.at4(1, 2, 2, 2) = 9.0;
    CHECK(w[w.numel() - 1] == 9.0);
}

TEST_CASE("tensor from and shape checks") {
    Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.at(0, 0) == 1);
    CHECK(t.at(1, 1) == 4);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({0, 2}), std::invalid_argument);

    Tensor a({2, 2}), b({2, 3});
    CHECK_THROWS_AS(a.check_same_shape(b, "test"), std::invalid_argument);
    CHECK(a.same_shape(Tensor({2, 2})));
}

TEST_CASE("tensor arithmetic helpers") {
    Tensor a = Tensor::from({3}, {1, 2, 3});
    Tensor b = Tensor::from({3}, {10, 20, 30});
    a.add_inplace(b);
    CHECK(a[2] == 33);
    a.scale_inplace(0.5);
    CHECK(a[0] == 5.5);
    CHECK(Tensor::scalar(4.25).item() == 4.25);
    CHECK_THROWS_AS(a.item(), std::logic_error);
    CHECK(a.shape_str() == "[3]");
}
