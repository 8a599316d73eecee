// Benchmarks the OpenMP kernels against their serial reference paths and
// verifies the two produce bitwise-identical results.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "sesar/clustering.hpp"
#include "sesar/harness.hpp"
#include "sesar/model.hpp"
#include "sesar/selection.hpp"

using namespace sesar;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        best = std::min(best, ms);
    }
    return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s %10.2f ms %10.2f ms %8.2fx   %s\n", kernel, serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel benchmark"};
    int classes = 6, per_class = 200, frames = 24, keypoints = 6, dim = 3;
    int hidden = 64, layers = 2, clusters = 12, budget = 60, repeats = 3, threads = 0;
    app.add_option("--classes", classes);
    app.add_option("--per-class", per_class);
    app.add_option("--frames", frames);
    app.add_option("--keypoints", keypoints);
    app.add_option("--dim", dim);
    app.add_option("--hidden", hidden);
    app.add_option("--layers", layers);
    app.add_option("--clusters", clusters);
    app.add_option("--budget", budget);
    app.add_option("--repeats", repeats);
    app.add_option("--threads", threads);
    CLI11_PARSE(app, argc, argv);
    set_threads(threads);

    SynthConfig sc;
    sc.num_classes = classes;
    sc.sequences_per_class = per_class;
    sc.frames = frames;
    sc.num_keypoints = keypoints;
    sc.dim = dim;
    sc.noise_std = 0.5;
    sc.seed = 11;
    Dataset ds = synth_generate(sc);

    ModelConfig mc;
    mc.input_size = ds.frame_width();
    mc.num_classes = classes;
    mc.hidden = hidden;
    mc.layers = layers;
    mc.init_seed = 3;
    SesarModel model = SesarModel::create(mc);

    std::printf("%d sequences, T=%d, width=%d, latent=%d, %d threads\n", ds.size(), frames,
                ds.frame_width(), model.latent_size(), max_threads());
    std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    Matrix lat_serial, lat_parallel;
    report("encode_all",
           time_ms([&] { lat_serial = encode_all(model, ds, ExecPolicy::Serial); }, repeats),
           time_ms([&] { lat_parallel = encode_all(model, ds, ExecPolicy::Parallel); }, repeats),
           lat_serial.data == lat_parallel.data);

    ClusterModel cm_serial, cm_parallel;
    report("kmeans_fit",
           time_ms([&] { cm_serial = kmeans_fit(lat_serial, clusters, 5, ExecPolicy::Serial); },
                   repeats),
           time_ms([&] { cm_parallel = kmeans_fit(lat_serial, clusters, 5, ExecPolicy::Parallel); },
                   repeats),
           cm_serial.assignment == cm_parallel.assignment &&
               cm_serial.centroids.data == cm_parallel.centroids.data);

    LabelPool pool = LabelPool::all_unlabeled(ds.size());
    pool = oracle_annotate(pool, {0, 1, 2, 3, 4, 5, 6, 7}, ds);

    SelectionResult cs_serial, cs_parallel;
    report("select_coreset",
           time_ms([&] { cs_serial = select_coreset(lat_serial, pool, budget, ExecPolicy::Serial); },
                   repeats),
           time_ms(
               [&] { cs_parallel = select_coreset(lat_serial, pool, budget, ExecPolicy::Parallel); },
               repeats),
           cs_serial.chosen == cs_parallel.chosen);

    Matrix probs_serial = class_probs(model, lat_serial, ExecPolicy::Serial);
    Matrix probs_parallel = class_probs(model, lat_serial, ExecPolicy::Parallel);
    ClusterBudgets bgts = budgets(cm_serial, pool, 0.2);
    SelectionResult kjs_serial, kjs_parallel;
    report("class_probs",
           time_ms([&] { probs_serial = class_probs(model, lat_serial, ExecPolicy::Serial); },
                   repeats),
           time_ms([&] { probs_parallel = class_probs(model, lat_serial, ExecPolicy::Parallel); },
                   repeats),
           probs_serial.data == probs_parallel.data);
    report("select_kjs",
           time_ms(
               [&] {
                   kjs_serial = select_kjs(cm_serial, bgts, pool, probs_serial,
                                           UncertaintyKind::Entropy, ExecPolicy::Serial);
               },
               repeats),
           time_ms(
               [&] {
                   kjs_parallel = select_kjs(cm_serial, bgts, pool, probs_serial,
                                             UncertaintyKind::Entropy, ExecPolicy::Parallel);
               },
               repeats),
           kjs_serial.chosen == kjs_parallel.chosen);

    return 0;
}
