#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace gr::kern {

// Every kernel partitions work by output element and keeps each element's
// accumulation order fixed (k ascending), so serial and parallel execution
// produce bit-identical results and reruns are reproducible at any thread
// count.
enum class Exec { serial, parallel };

template <typename F>
inline void for_each_index(long n, Exec exec, F&& fn) {
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) fn(i);
    } else {
        for (long i = 0; i < n; ++i) fn(i);
    }
}

namespace detail {

// Register tile: MR rows x NR columns accumulated across the whole k range,
// so C is touched once per tile and a B column panel stays cache-resident.
template <typename T>
inline constexpr long kNR = 256 / sizeof(T);  // 64 floats / 32 doubles
inline constexpr long kMR = 4;

// trans_a=false: A is (m x k) row-major, a_row_stride = k.
// trans_a=true:  A is stored (k x m) and read as its transpose.
template <typename T, bool trans_a>
inline void micro_tile(const T* a, const T* b, T* c, long i0, long jb, long rows, long cols,
                       long m, long n, long k, bool accumulate) {
    constexpr long NR = kNR<T>;
    T acc[kMR][NR];
    for (long r = 0; r < rows; ++r) {
        for (long j = 0; j < cols; ++j)
            acc[r][j] = accumulate ? c[(i0 + r) * n + jb + j] : T(0);
    }
    if (rows == kMR && cols == NR) {
        // full tile: fixed trip counts keep the accumulators in registers
        for (long kk = 0; kk < k; ++kk) {
            const T* brow = b + kk * n + jb;
            for (long r = 0; r < kMR; ++r) {
                const T av = trans_a ? a[kk * m + i0 + r] : a[(i0 + r) * k + kk];
#pragma omp simd
                for (long j = 0; j < NR; ++j) acc[r][j] += av * brow[j];
            }
        }
    } else {
        for (long kk = 0; kk < k; ++kk) {
            const T* brow = b + kk * n + jb;
            for (long r = 0; r < rows; ++r) {
                const T av = trans_a ? a[kk * m + i0 + r] : a[(i0 + r) * k + kk];
#pragma omp simd
                for (long j = 0; j < cols; ++j) acc[r][j] += av * brow[j];
            }
        }
    }
    for (long r = 0; r < rows; ++r) {
        for (long j = 0; j < cols; ++j) c[(i0 + r) * n + jb + j] = acc[r][j];
    }
}

template <typename T, bool trans_a>
void gemm_impl(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate,
               Exec exec) {
    constexpr long NR = kNR<T>;
    const long iblocks = (m + kMR - 1) / kMR;
    const long jblocks = (n + NR - 1) / NR;
    // tiles are independent; j-major order keeps one B panel hot per sweep
    for_each_index(jblocks * iblocks, exec, [&](long t) {
        const long jb = (t / iblocks) * NR;
        const long i0 = (t % iblocks) * kMR;
        micro_tile<T, trans_a>(a, b, c, i0, jb, std::min(kMR, m - i0), std::min(NR, n - jb), m,
                               n, k, accumulate);
    });
}

}  // namespace detail

// C(MxN) = A(MxK) * B(KxN), row-major. accumulate=false overwrites C.
template <typename T>
void gemm(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate, Exec exec) {
    detail::gemm_impl<T, false>(a, b, c, m, n, k, accumulate, exec);
}

// C(MxN) = A^T * B where A is stored (KxM): the dY^T * col product of the
// weight-gradient pass, computed without materializing the transpose.
template <typename T>
void gemm_at(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate, Exec exec) {
    detail::gemm_impl<T, true>(a, b, c, m, n, k, accumulate, exec);
}

// out(N x M) = in(M x N)^T, tiled.
template <typename T>
void transpose(const T* in, T* out, long m, long n, Exec exec) {
    constexpr long TB = 64;
    const long row_tiles = (m + TB - 1) / TB;
    const long col_tiles = (n + TB - 1) / TB;
    for_each_index(row_tiles * col_tiles, exec, [&](long t) {
        const long i0 = (t / col_tiles) * TB;
        const long j0 = (t % col_tiles) * TB;
        const long i1 = std::min(i0 + TB, m);
        const long j1 = std::min(j0 + TB, n);
        for (long i = i0; i < i1; ++i)
            for (long j = j0; j < j1; ++j) out[j * m + i] = in[i * n + j];
    });
}

// Straight-line implementations kept as oracles for the blocked kernels.
namespace ref {

template <typename T>
void gemm(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate) {
    for (long i = 0; i < m; ++i) {
        for (long j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            for (long kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <typename T>
void gemm_at(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate) {
    for (long i = 0; i < m; ++i) {
        for (long j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            for (long kk = 0; kk < k; ++kk) acc += a[kk * m + i] * b[kk * n + j];
            c[i * n + j] = acc;
        }
    }
}

}  // namespace ref

}  // namespace gr::kern
