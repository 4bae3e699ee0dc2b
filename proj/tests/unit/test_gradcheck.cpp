#include <doctest.h>

#include <string>
#include <vector>

#include "disen/gradcheck.hpp"

using namespace disen;

TEST_CASE("grad check battery covers all five suites and passes") {
    const std::vector<GradCheckResult> results = run_grad_checks(0);
    REQUIRE(results.size() == 5);
    const char* names[] = {"cod_loss", "cd_loss", "extractor_pooled", "dual_cross_attention",
                           "train_step_total"};
    for (std::size_t i = 0; i < results.size(); ++i) {
        CAPTURE(results[i].name);
        CAPTURE(results[i].max_rel_err);
        CHECK(results[i].name == names[i]);
        CHECK(results[i].probes > 0);
        CHECK(results[i].tolerance == (results[i].name == "train_step_total" ? 1e-3 : 1e-4));
        CHECK(results[i].pass);
        CHECK(results[i].pass == (results[i].max_rel_err < results[i].tolerance));
    }
}

TEST_CASE("grad check is deterministic in its seed") {
    const std::vector<GradCheckResult> a = run_grad_checks(42);
    const std::vector<GradCheckResult> b = run_grad_checks(42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].max_rel_err == b[i].max_rel_err);
        CHECK(a[i].probes == b[i].probes);
    }
}
