#include <doctest.h>

#include <vector>

#include "cgt/kernels.hpp"
#include "cgt/rng.hpp"

using namespace cgt;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.normal(0.0, 1.0));
    return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double rtol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double tol = rtol * std::max({1.0, std::abs(double(a[i])), std::abs(double(b[i]))});
        CHECK(std::abs(double(a[i]) - double(b[i])) <= tol);
    }
}

} // namespace

TEST_CASE("gemm reference matches hand-computed products") {
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
    const std::vector<float> a{1, 2, 3, 4};
    const std::vector<float> b{5, 6, 7, 8};
    std::vector<float> c(4, 0.0f);

    kernels::ref::gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2, false);
    CHECK(c == std::vector<float>{19, 22, 43, 50});

    // A * B^T
    kernels::ref::gemm_nt(a.data(), b.data(), c.data(), 2, 2, 2, false);
    CHECK(c == std::vector<float>{17, 23, 39, 53});

    // A^T * B
    kernels::ref::gemm_tn(a.data(), b.data(), c.data(), 2, 2, 2, false);
    CHECK(c == std::vector<float>{26, 30, 38, 44});

    // accumulate on top
    kernels::ref::gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2, true);
    CHECK(c == std::vector<float>{26 + 19, 30 + 22, 38 + 43, 44 + 50});
}

TEST_CASE("active backend reports a known name") {
    const kernels::Isa isa = kernels::active();
    CHECK((isa == kernels::Isa::scalar || isa == kernels::Isa::avx2));
    CHECK(kernels::isa_supported(kernels::Isa::scalar));
    CHECK(kernels::select(isa));
}

TEST_CASE("avx2 kernels match the scalar reference") {
    if (!kernels::isa_supported(kernels::Isa::avx2)) {
        MESSAGE("avx2 not supported on this host; skipping equivalence");
        return;
    }
    REQUIRE(kernels::select(kernels::Isa::avx2));
    Rng rng(7);

    // deliberately awkward sizes around the 8-lane width
    const std::size_t dims[][3] = {{1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 9, 17}, {32, 24, 40}, {5, 64, 3}};
    for (const auto& d : dims) {
        const std::size_t n = d[0], k = d[1], m = d[2];
        const auto A = random_vec(rng, n * k);
        const auto Bnn = random_vec(rng, k * m);
        const auto Bnt = random_vec(rng, m * k);
        const auto At = random_vec(rng, k * n);
        std::vector<float> got(n * m), want(n * m);

        kernels::gemm_nn(A.data(), Bnn.data(), got.data(), n, k, m, false);
        kernels::ref::gemm_nn(A.data(), Bnn.data(), want.data(), n, k, m, false);
        check_close(got, want, 1e-5);

        kernels::gemm_nt(A.data(), Bnt.data(), got.data(), n, k, m, false);
        kernels::ref::gemm_nt(A.data(), Bnt.data(), want.data(), n, k, m, false);
        check_close(got, want, 1e-5);

        kernels::gemm_tn(At.data(), Bnn.data(), got.data(), n, k, m, false);
        kernels::ref::gemm_tn(At.data(), Bnn.data(), want.data(), n, k, m, false);
        check_close(got, want, 1e-5);
    }

    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 64u, 100u}) {
        const auto x = random_vec(rng, n);
        const auto y = random_vec(rng, n);
        std::vector<float> got(n), want(n);

        // elementwise paths have identical operation order: bit-equal
        kernels::add(x.data(), y.data(), got.data(), n);
        kernels::ref::add(x.data(), y.data(), want.data(), n);
        CHECK(got == want);
        kernels::sub(x.data(), y.data(), got.data(), n);
        kernels::ref::sub(x.data(), y.data(), want.data(), n);
        CHECK(got == want);
        kernels::mul(x.data(), y.data(), got.data(), n);
        kernels::ref::mul(x.data(), y.data(), want.data(), n);
        CHECK(got == want);
        kernels::relu(x.data(), got.data(), n);
        kernels::ref::relu(x.data(), want.data(), n);
        CHECK(got == want);
        kernels::leaky_relu(x.data(), 0.2f, got.data(), n);
        kernels::ref::leaky_relu(x.data(), 0.2f, want.data(), n);
        CHECK(got == want);
        kernels::scale(x.data(), 1.7f, got.data(), n);
        kernels::ref::scale(x.data(), 1.7f, want.data(), n);
        CHECK(got == want);

        // axpy fuses the multiply-add on AVX2 (single rounding): tolerance-based
        got = y;
        want = y;
        kernels::axpy(0.3f, x.data(), got.data(), n);
        kernels::ref::axpy(0.3f, x.data(), want.data(), n);
        check_close(got, want, 1e-6);

        got.assign(n, 0.5f);
        want.assign(n, 0.5f);
        kernels::relu_grad_acc(x.data(), y.data(), got.data(), n);
        kernels::ref::relu_grad_acc(x.data(), y.data(), want.data(), n);
        CHECK(got == want);
        kernels::leaky_relu_grad_acc(x.data(), 0.2f, y.data(), got.data(), n);
        kernels::ref::leaky_relu_grad_acc(x.data(), 0.2f, y.data(), want.data(), n);
        CHECK(got == want);

        // reductions reassociate: tolerance-based
        CHECK(std::abs(kernels::dot(x.data(), y.data(), n) - kernels::ref::dot(x.data(), y.data(), n)) <=
              1e-4 * n);
        CHECK(std::abs(kernels::reduce_sum(x.data(), n) - kernels::ref::reduce_sum(x.data(), n)) <=
              1e-4 * n);
        CHECK(kernels::reduce_max(x.data(), n) == kernels::ref::reduce_max(x.data(), n));
    }

    REQUIRE(kernels::select(kernels::active()));
}

TEST_CASE("scalar backend can be forced") {
    REQUIRE(kernels::select(kernels::Isa::scalar));
    CHECK(kernels::active() == kernels::Isa::scalar);
    CHECK(kernels::isa_name(kernels::active()) == "scalar");
    // restore default for other assertions in this binary
    if (kernels::isa_supported(kernels::Isa::avx2)) kernels::select(kernels::Isa::avx2);
}
