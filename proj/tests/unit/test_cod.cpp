#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "disen/cod.hpp"
#include "helpers.hpp"

using namespace disen;
using testutil::bit_equal;
using testutil::max_abs_diff;

namespace {

Tensor unit_axis(int d, int axis, double sign = 1.0) {
    Tensor v({1, d});
    v.at(0, axis) = sign;
    return v;
}

Tensor random_unit(int d, Rng& rng) {
    Tensor v({1, d});
    double sq = 0.0;
    for (int i = 0; i < d; ++i) {
        v.at(0, i) = rng.normal();
        sq += v.at(0, i) * v.at(0, i);
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (int i = 0; i < d; ++i) v.at(0, i) *= inv;
    return v;
}

Tensor negated(const Tensor& v) {
    Tensor out(v.shape());
    for (std::size_t i = 0; i < v.numel(); ++i) out[i] = -v[i];
    return out;
}

}  // namespace

TEST_CASE("cod extremes: orthogonal anti + aligned concept = -1; flipped concept = 2") {
    const int d = 8;
    Tensor e1 = unit_axis(d, 0), e2 = unit_axis(d, 1);
    CHECK(cod_loss(e2, e1, e2) == -1.0);                 // f_a _|_ f_tar, f_cpt = f_tar
    CHECK(cod_loss(negated(e2), e2, e2) == 2.0);         // f_a = f_tar, f_cpt = -f_tar
    CHECK(cd_loss(e2, e1, e2) == -1.0);                  // same orthogonal case under CD
    CHECK(cd_loss(e2, negated(e2), e2) == -2.0);         // CD rewards anti-alignment...
    CHECK(cod_loss(e2, negated(e2), e2) == 0.0);         // ...where |cos| gives 1 - 1 = 0
}

TEST_CASE("cod matches an independent dot-product oracle on random unit vectors") {
    Rng rng(501);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 4 + static_cast<int>(rng.below(60));
        Tensor a = random_unit(d, rng), b = random_unit(d, rng), c = random_unit(d, rng);
        double dot_bc = 0.0, dot_ac = 0.0;
        for (int i = 0; i < d; ++i) {
            dot_bc += b.at(0, i) * c.at(0, i);
            dot_ac += a.at(0, i) * c.at(0, i);
        }
        CHECK(std::fabs(cod_loss(a, b, c) - (std::fabs(dot_bc) - dot_ac)) < 1e-8);
        CHECK(std::fabs(cd_loss(a, b, c) - (dot_bc - dot_ac)) < 1e-8);
    }
}

TEST_CASE("ranges over random sweeps and the CD/COD equality condition") {
    Rng rng(502);
    int equal_cases = 0, strict_cases = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Tensor a = random_unit(16, rng), b = random_unit(16, rng), c = random_unit(16, rng);
        const double cod = cod_loss(a, b, c);
        const double cd = cd_loss(a, b, c);
        CHECK(cod >= -1.0 - 1e-12);
        CHECK(cod <= 2.0 + 1e-12);
        CHECK(cd >= -2.0 - 1e-12);
        CHECK(cd <= 2.0 + 1e-12);
        double dot_bc = 0.0;
        for (int i = 0; i < 16; ++i) dot_bc += b.at(0, i) * c.at(0, i);
        if (dot_bc >= 0.0) {
            CHECK(cd == cod);
            ++equal_cases;
        } else {
            CHECK(cd < cod);
            ++strict_cases;
        }
    }
    CHECK(equal_cases > 300);
    CHECK(strict_cases > 300);
}

TEST_CASE("cod is exactly invariant to the sign of f_a") {
    Rng rng(503);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor a = random_unit(32, rng), b = random_unit(32, rng), c = random_unit(32, rng);
        CHECK(cod_loss(a, b, c) == cod_loss(a, negated(b), c));
    }
}

TEST_CASE("non-unit inputs are rejected by value and tape variants") {
    Tensor good = unit_axis(4, 0);
    Tensor bad({1, 4});
    bad.at(0, 0) = 1.01;  // norm deviates > 1e-3
    CHECK_THROWS_AS((void)cod_loss(bad, good, good), std::invalid_argument);
    CHECK_THROWS_AS((void)cod_loss(good, bad, good), std::invalid_argument);
    CHECK_THROWS_AS((void)cod_loss(good, good, bad), std::invalid_argument);
    CHECK_THROWS_AS((void)cd_loss(bad, good, good), std::invalid_argument);

    ad::Tape tape;
    ad::VarId g = tape.input(good), n = tape.input(bad);
    CHECK_THROWS_AS((void)cod_loss(tape, n, g, g), std::invalid_argument);
    CHECK_THROWS_AS((void)cd_loss(tape, g, n, g), std::invalid_argument);

    Tensor nearly({1, 4});
    nearly.at(0, 0) = 1.0005;  // within the 1e-3 tolerance
    CHECK_NOTHROW((void)cod_loss(nearly, good, good));
}

TEST_CASE("total_loss follows Eq. 7 and its ablation switches") {
    LossWeights w;
    CHECK(w.lambda == 1e-4);
    CHECK(w.variant == ContrastiveVariant::COD);
    CHECK(std::fabs(total_loss(0.5, -1.0, w) - 0.4999) < 1e-12);

    w.lambda = 0.0;
    CHECK(total_loss(0.7, 123.0, w) == 0.7);

    w.lambda = 1e-4;
    w.variant = ContrastiveVariant::None;
    CHECK(total_loss(0.7, -55.0, w) == 0.7);

    w.variant = ContrastiveVariant::CD;
    CHECK(std::fabs(total_loss(1.0, 2.0, w) - 1.0002) < 1e-12);

    w.lambda = -1.0;
    CHECK_THROWS_AS((void)total_loss(0.0, 0.0, w), std::invalid_argument);

    ad::Tape tape;
    ad::VarId ldm = tape.input(Tensor::scalar(0.5));
    ad::VarId con = tape.input(Tensor::scalar(-1.0));
    LossWeights def;
    CHECK(std::fabs(tape.value(total_loss(tape, ldm, con, def)).item() - 0.4999) < 1e-12);
    def.variant = ContrastiveVariant::None;
    CHECK(total_loss(tape, ldm, con, def) == ldm);  // same node, no new term
}

TEST_CASE("tape cod/cd agree with the value forms and backpropagate correctly") {
    Rng rng(504);
    Tensor a = random_unit(12, rng), b = random_unit(12, rng), c = random_unit(12, rng);

    ad::Tape tape;
    ad::VarId av = tape.input(a), bv = tape.input(b), cv = tape.input(c);
    ad::VarId cod = cod_loss(tape, av, bv, cv);
    CHECK(tape.value(cod).item() == doctest::Approx(cod_loss(a, b, c)).epsilon(1e-12));
    ad::Tape tape2;
    ad::VarId a2 = tape2.input(a), b2 = tape2.input(b), c2 = tape2.input(c);
    CHECK(tape2.value(cd_loss(tape2, a2, b2, c2)).item() ==
          doctest::Approx(cd_loss(a, b, c)).epsilon(1e-12));

    // Finite differences against the value form, all three inputs.
    tape.backward(cod);
    auto fd_against = [&](const Tensor& base, int which, const Tensor& grad) {
        Rng pick(505 + static_cast<std::uint64_t>(which));
        const double eps = 1e-6;
        for (int trial = 0; trial < 6; ++trial) {
            std::size_t idx = pick.below(base.numel());
            Tensor pert = base;
            pert[idx] = base[idx] + eps;
            Tensor f_cpt = which == 0 ? pert : a;
            Tensor f_a = which == 1 ? pert : b;
            Tensor f_tar = which == 2 ? pert : c;
            const double up = cod_loss(f_cpt, f_a, f_tar);
            pert[idx] = base[idx] - eps;
            f_cpt = which == 0 ? pert : a;
            f_a = which == 1 ? pert : b;
            f_tar = which == 2 ? pert : c;
            const double dn = cod_loss(f_cpt, f_a, f_tar);
            const double fd = (up - dn) / (2.0 * eps);
            CHECK(std::fabs(grad[idx] - fd) <= 1e-4 * std::max(0.05, std::fabs(fd)));
        }
    };
    fd_against(a, 0, tape.grad(av));
    fd_against(b, 1, tape.grad(bv));
    fd_against(c, 2, tape.grad(cv));
}

TEST_CASE("at exact orthogonality the |cos| subgradient w.r.t. f_a is zero") {
    const int d = 6;
    Tensor f_a = unit_axis(d, 0);
    Tensor f_tar = unit_axis(d, 1);  // dot exactly 0
    Rng rng(506);
    Tensor f_cpt = random_unit(d, rng);

    ad::Tape tape;
    ad::VarId av = tape.input(f_cpt), bv = tape.input(f_a), cv = tape.input(f_tar);
    tape.backward(cod_loss(tape, av, bv, cv));
    const Tensor& g = tape.grad(bv);
    for (std::size_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
    // ...while the concept gradient is -f_tar, nonzero.
    CHECK(tape.grad(av).at(0, 1) == -1.0);
}

TEST_CASE("cosine is invariant to positive scaling applied before pooling") {
    Rng rng(507);
    Tensor tokens = testutil::random_tensor({6, 10}, rng);
    Tensor scaled(tokens.shape());
    for (std::size_t i = 0; i < tokens.numel(); ++i) scaled[i] = 3.0 * tokens[i];
    Tensor other = random_unit(10, rng);

    ad::Tape tape;
    ad::VarId pooled1 = tape.normalize_rows(tape.mean_rows(tape.input(tokens)));
    ad::VarId pooled2 = tape.normalize_rows(tape.mean_rows(tape.input(scaled)));
    ad::VarId ov = tape.input(other);
    double c1 = tape.value(tape.sum_mul(pooled1, ov)).item();
    double c2 = tape.value(tape.sum_mul(pooled2, ov)).item();
    CHECK(std::fabs(c1 - c2) < 1e-12);
}
