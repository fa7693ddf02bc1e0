// Timing harness for the compute kernels: straight-line reference vs the
// blocked kernels, serial vs OpenMP, plus end-to-end member training steps.

#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "gr/imgproc.hpp"
#include "gr/modelzoo.hpp"
#include "gr/nn.hpp"

using namespace gr;
namespace mz = gr::modelzoo;

namespace {

double seconds(const std::function<void()>& fn, int reps) {
    using clock = std::chrono::steady_clock;
    fn();  // warm up
    const auto t0 = clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void bench_gemm(long m, long n, long k) {
    Rng rng(1);
    std::vector<float> a(m * k), b(k * n), c(m * n);
    for (auto& v : a) v = static_cast<float>(uniform_range(rng, -1, 1));
    for (auto& v : b) v = static_cast<float>(uniform_range(rng, -1, 1));

    const double flops = 2.0 * m * n * k;
    const int reps = std::max(1, static_cast<int>(2e9 / flops));

    // the straight-line reference is only affordable on the smaller shapes
    const bool run_ref = m * n * k <= 512L * 16 * 8192;
    const double t_ref =
        run_ref ? seconds([&] { kern::ref::gemm(a.data(), b.data(), c.data(), m, n, k, false); },
                          1)
                : 0.0;
    const double t_serial = seconds(
        [&] { kern::gemm(a.data(), b.data(), c.data(), m, n, k, false, kern::Exec::serial); },
        reps);
    const double t_par = seconds(
        [&] { kern::gemm(a.data(), b.data(), c.data(), m, n, k, false, kern::Exec::parallel); },
        reps);

    char ref_col[24];
    if (run_ref) {
        std::snprintf(ref_col, sizeof(ref_col), "%8.1f ms", t_ref * 1e3);
    } else {
        std::snprintf(ref_col, sizeof(ref_col), "%11s", "(skipped)");
    }
    std::printf("gemm  %5ldx%6ldx%5ld  ref %s  serial %8.2f ms (%5.1f GF/s)  omp %8.2f ms "
                "(%5.1f GF/s)  speedup %.2fx\n",
                m, n, k, ref_col, t_serial * 1e3, flops / t_serial / 1e9, t_par * 1e3,
                flops / t_par / 1e9, t_serial / t_par);
}

void bench_imgproc() {
    Rng rng(2);
    GrayImage img(640, 480);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(uniform_below(rng, 256));
    BinaryMask mask(640, 480);
    for (auto& v : mask.data) v = uniform_unit(rng) < 0.5 ? 1 : 0;

    auto report = [&](const char* name, auto&& serial_fn, auto&& par_fn) {
        const double ts = seconds(serial_fn, 3);
        const double tp = seconds(par_fn, 3);
        std::printf("%-18s serial %8.2f ms   omp %8.2f ms   speedup %.2fx\n", name, ts * 1e3,
                    tp * 1e3, ts / tp);
    };

    report("median 5x5 640x480",
           [&] { imgproc::median_filter(img, 5, kern::Exec::serial); },
           [&] { imgproc::median_filter(img, 5, kern::Exec::parallel); });
    report("edt 640x480",
           [&] { imgproc::distance_transform_squared(mask, kern::Exec::serial); },
           [&] { imgproc::distance_transform_squared(mask, kern::Exec::parallel); });
    report("resize to 64x64",
           [&] { imgproc::resize(img, 64, 64, kern::Exec::serial); },
           [&] { imgproc::resize(img, 64, 64, kern::Exec::parallel); });
}

void bench_member_step(const mz::ModelSpec& spec, int batch) {
    nn::Network<float> net(spec);
    Rng rng(3);
    net.init_params(rng);
    nn::Tensor<float> x(batch, spec.input.h, spec.input.w, spec.input.c);
    for (long i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(uniform_unit(rng));
    std::vector<int> labels(batch);
    for (auto& l : labels) l = static_cast<int>(uniform_below(rng, spec.num_classes));

    Rng dummy(0);
    const double t_step = seconds(
        [&] {
            nn::Tensor<float> copy = x;
            net.loss_and_gradients(std::move(copy), labels, dummy);
        },
        2);
    const double t_fwd = seconds(
        [&] {
            nn::Tensor<float> copy = x;
            net.forward(std::move(copy), false);
        },
        2);
    std::printf("%-16s batch %2d   fwd %8.1f ms   fwd+bwd %8.1f ms\n", spec.name.c_str(), batch,
                t_fwd * 1e3, t_step * 1e3);
}

}  // namespace

int main() {
    std::printf("threads: %d\n\n", omp_get_max_threads());

    bench_gemm(64, 65536, 576);    // deep member, second conv, batch 16
    bench_gemm(512, 1024, 4608);   // deep member, last conv block
    bench_gemm(256, 4096, 1728);   // inception 3x3 branch
    bench_gemm(512, 16, 8192);     // classifier head
    std::printf("\n");

    bench_imgproc();
    std::printf("\n");

    for (auto maker : {mz::alexnet_like, mz::googlenet_like, mz::vggnet_like}) {
        bench_member_step(maker(10), 16);
    }
    return 0;
}
