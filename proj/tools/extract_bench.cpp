// Benchmark comparing the serial reference extraction against the parallel
// kernels at each level. Prints a small table of medians.
#include "bimshare/extract.hpp"
#include "bimshare/schema.hpp"
#include "bimshare/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

using namespace bimshare;

namespace {

double time_ms(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

} // namespace

int main(int argc, char** argv) {
    std::size_t entities = 200000;
    int workers = 8;
    int runs = 5;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--entities" && i + 1 < argc) entities = std::strtoull(argv[++i], nullptr, 10);
        else if (a == "--workers" && i + 1 < argc) workers = std::atoi(argv[++i]);
        else if (a == "--runs" && i + 1 < argc) runs = std::atoi(argv[++i]);
        else {
            std::cerr << "usage: extract_bench [--entities N] [--workers N] [--runs N]\n";
            return 2;
        }
    }

    const Schema& schema = mini_ifc_schema();
    Model model = synth_model(schema, synth_options_for(entities, 42));
    std::cout << "model: " << model.size() << " entities, workers: " << workers
              << ", runs: " << runs << "\n";

    ModelView view = parse_mvd(
        "<ModelView name=\"bench\">"
        "<Rule type=\"IfcColumn\"><Contains path=\"Tag\" value=\"C-\"/></Rule>"
        "<Rule type=\"IfcBeam\"/>"
        "<Rule type=\"IfcBuildingStorey\"/>"
        "</ModelView>",
        schema);

    std::vector<double> seq;
    for (int r = 0; r < runs; ++r)
        seq.push_back(time_ms([&] { extract(model, view, ExtractionMode::Broad); }));
    double seq_med = median(seq);
    std::cout << "sequential            " << seq_med << " ms\n";

    struct Row {
        const char* name;
        ParallelLevel level;
    };
    for (Row row : {Row{"parallel (server)  ", ParallelLevel::Server},
                    Row{"parallel (type)    ", ParallelLevel::Type},
                    Row{"parallel (instance)", ParallelLevel::Instance}}) {
        std::vector<double> par;
        for (int r = 0; r < runs; ++r)
            par.push_back(time_ms([&] {
                extract_parallel(model, view, ExtractionMode::Broad, row.level, workers);
            }));
        double par_med = median(par);
        std::cout << row.name << "   " << par_med << " ms   speedup "
                  << (par_med > 0 ? seq_med / par_med : 0.0) << "x\n";
    }
    return 0;
}
