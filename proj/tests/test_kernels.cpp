#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gr/common.hpp"
#include "gr/kernels.hpp"

using namespace gr;

namespace {

template <typename T>
std::vector<T> random_matrix(Rng& rng, long rows, long cols) {
    std::vector<T> m(rows * cols);
    for (auto& v : m) v = static_cast<T>(uniform_range(rng, -1.0, 1.0));
    return m;
}

}  // namespace

TEST_CASE("blocked gemm matches the straight-line reference") {
    Rng rng(21);
    for (auto [m, n, k] : {std::tuple{3L, 5L, 4L}, {17L, 129L, 65L}, {64L, 3000L, 320L},
                           {1L, 1L, 1L}, {5L, 2049L, 257L}}) {
        auto a = random_matrix<float>(rng, m, k);
        auto b = random_matrix<float>(rng, k, n);
        std::vector<float> c(m * n), c_ref(m * n);
        kern::gemm(a.data(), b.data(), c.data(), m, n, k, false, kern::Exec::parallel);
        kern::ref::gemm(a.data(), b.data(), c_ref.data(), m, n, k, false);
        for (long i = 0; i < m * n; ++i)
            CHECK(c[i] == doctest::Approx(c_ref[i]).epsilon(1e-5));
    }
}

TEST_CASE("gemm in double agrees with the reference to near machine precision") {
    Rng rng(22);
    const long m = 13, n = 700, k = 301;
    auto a = random_matrix<double>(rng, m, k);
    auto b = random_matrix<double>(rng, k, n);
    std::vector<double> c(m * n), c_ref(m * n);
    kern::gemm(a.data(), b.data(), c.data(), m, n, k, false, kern::Exec::parallel);
    kern::ref::gemm(a.data(), b.data(), c_ref.data(), m, n, k, false);
    for (long i = 0; i < m * n; ++i) CHECK(c[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
}

TEST_CASE("gemm serial and parallel execution are bit-identical") {
    Rng rng(23);
    const long m = 37, n = 2500, k = 200;
    auto a = random_matrix<float>(rng, m, k);
    auto b = random_matrix<float>(rng, k, n);
    std::vector<float> c1(m * n), c2(m * n);
    kern::gemm(a.data(), b.data(), c1.data(), m, n, k, false, kern::Exec::serial);
    kern::gemm(a.data(), b.data(), c2.data(), m, n, k, false, kern::Exec::parallel);
    CHECK(c1 == c2);

    // reruns are identical too
    std::vector<float> c3(m * n);
    kern::gemm(a.data(), b.data(), c3.data(), m, n, k, false, kern::Exec::parallel);
    CHECK(c2 == c3);
}

TEST_CASE("gemm accumulate adds into the destination") {
    Rng rng(24);
    const long m = 4, n = 6, k = 3;
    auto a = random_matrix<float>(rng, m, k);
    auto b = random_matrix<float>(rng, k, n);
    std::vector<float> c(m * n, 1.0f), c_ref(m * n, 1.0f);
    kern::gemm(a.data(), b.data(), c.data(), m, n, k, true, kern::Exec::serial);
    kern::ref::gemm(a.data(), b.data(), c_ref.data(), m, n, k, true);
    for (long i = 0; i < m * n; ++i) CHECK(c[i] == doctest::Approx(c_ref[i]).epsilon(1e-5));
}

TEST_CASE("gemm_at computes the transposed-A product") {
    Rng rng(25);
    const long m = 24, n = 310, k = 97;  // A stored k x m
    auto a = random_matrix<float>(rng, k, m);
    auto b = random_matrix<float>(rng, k, n);
    std::vector<float> c(m * n), c_ref(m * n);
    kern::gemm_at(a.data(), b.data(), c.data(), m, n, k, false, kern::Exec::parallel);
    kern::ref::gemm_at(a.data(), b.data(), c_ref.data(), m, n, k, false);
    for (long i = 0; i < m * n; ++i)
        CHECK(c[i] == doctest::Approx(c_ref[i]).epsilon(1e-5));

    std::vector<float> c_serial(m * n);
    kern::gemm_at(a.data(), b.data(), c_serial.data(), m, n, k, false, kern::Exec::serial);
    CHECK(c == c_serial);
}

TEST_CASE("transpose") {
    Rng rng(26);
    const long m = 130, n = 70;
    auto a = random_matrix<float>(rng, m, n);
    std::vector<float> t(m * n);
    kern::transpose(a.data(), t.data(), m, n, kern::Exec::parallel);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < n; ++j) CHECK(t[j * m + i] == a[i * n + j]);
}
