// Serial reference vs OpenMP kernels: wall time and bitwise agreement.

#include "dpo/envs.hpp"
#include "dpo/kernels.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <tuple>

using namespace dpo;

namespace {

double time_best(const std::function<void()>& body, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        body();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
}

bool same(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

bool same(const OccupancyBounds& a, const OccupancyBounds& b) {
    return a.upper.values() == b.upper.values() && a.lower.values() == b.lower.values();
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-34s serial %9.4f s   omp %9.4f s   speedup %5.2fx   %s\n", name, serial, parallel,
                serial / parallel, identical ? "identical" : "MISMATCH");
}

} // namespace

int main() {
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());

    for (auto [d, M, N] : {std::tuple{8, 64, 200}, std::tuple{16, 128, 200}, std::tuple{32, 64, 400}}) {
        Rng rng(1);
        const std::size_t H = 4;
        FeatureSamples samples(static_cast<std::size_t>(M * N));
        for (auto& s : samples)
            for (std::size_t h = 0; h < H; ++h) {
                Vector v(d);
                for (auto& e : v) e = rng.uniform() * 2.0 - 1.0;
                s.push_back(v / std::max(1.0, v.norm()));
            }
        std::vector<Matrix> a, b;
        const double ts = time_best([&] { a = gr_kernel_serial(samples, M, N, 0.05, 0.5); }, 3);
        const double tp = time_best([&] { b = gr_kernel_parallel(samples, M, N, 0.05, 0.5); }, 3);
        char name[64];
        std::snprintf(name, sizeof name, "resampling d=%d M=%d N=%d H=4", d, M, N);
        report(name, ts, tp, same(a, b));
    }

    for (std::size_t width : {8, 16, 32}) {
        InstanceSpec spec;
        spec.layer_sizes = {1, width, width, width, 1};
        spec.num_actions = 4;
        spec.seed = 3;
        const auto mdp = generate_instance(spec).mdp;
        const auto& L = mdp.layers();
        // moderate widths around the true kernel
        std::vector<std::vector<double>> center, widths;
        for (StateId x = 0; x < L.num_decision_states(); ++x)
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const auto row = mdp.next_distribution(x, a);
                center.emplace_back(row.begin(), row.end());
                widths.emplace_back(row.size(), 0.1);
            }
        const ConfidenceSet conf(L, center, widths);
        const Policy pi = Policy::uniform(L);
        OccupancyBounds a, b;
        const double ts = time_best([&] { a = occupancy_bounds_serial(pi, conf); }, 3);
        const double tp = time_best([&] { b = occupancy_bounds_parallel(pi, conf); }, 3);
        char name[64];
        std::snprintf(name, sizeof name, "occupancy bounds |X_h|=%zu A=4 H=4", width);
        report(name, ts, tp, same(a, b));
    }
    return 0;
}
