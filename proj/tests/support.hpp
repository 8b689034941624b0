#pragma once

// Shared helpers for the unit and acceptance tests.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "multigrad/gradients.hpp"
#include "multigrad/tensor.hpp"

namespace testsupport {

using multigrad::RngStream;
using multigrad::TaskGradients;
using multigrad::Tensor;

// Random gradient set: 2-5 tasks, rank 1 or 2, ~20% exact zeros, values in
// [-5, 5]. One third of the sets are batched; batched sets sometimes carry
// activations.
inline TaskGradients random_task_gradients(RngStream& rng,
                                           bool allow_batched = true) {
    TaskGradients tg;
    std::size_t n = 2 + rng.next_below(4);

    bool batched = allow_batched && rng.next_below(3) == 0;
    std::vector<std::size_t> shape;
    if (batched || rng.next_below(3) == 0)
        shape = {2 + rng.next_below(3), 1 + rng.next_below(4)};
    else
        shape = {1 + rng.next_below(6)};

    tg.batched = batched;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor g(shape);
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (rng.next_below(5) == 0)
                g[j] = 0.0;
            else
                g[j] = rng.next_uniform() * 10.0 - 5.0;
        }
        tg.grads.push_back(std::move(g));
    }
    if (batched && rng.next_below(2) == 0) {
        Tensor act(shape);
        for (std::size_t j = 0; j < act.size(); ++j)
            act[j] = rng.next_uniform() * 4.0 - 2.0;
        tg.activations = std::move(act);
    }
    return tg;
}

// The sign content graddrop samples masks from: activation-sign premultiply,
// then a batch-axis sum when the set marginalizes.
inline std::vector<Tensor> sampling_space(const TaskGradients& tg,
                                          bool marginalize) {
    bool marg = tg.batched && (tg.batch_separated || marginalize);
    std::vector<Tensor> gsign;
    gsign.reserve(tg.grads.size());
    for (const Tensor& g : tg.grads) {
        Tensor s = tg.activations
                       ? multigrad::elementwise_mul(g, multigrad::sign(*tg.activations))
                       : g;
        gsign.push_back(marg ? multigrad::sum_over_batch(s) : std::move(s));
    }
    return gsign;
}

// Fresh directory under the system temp root; caller removes it.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::uint64_t counter = 0;
    auto base = std::filesystem::temp_directory_path();
    std::filesystem::path dir;
    do {
        dir = base / (tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    } while (std::filesystem::exists(dir));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Strips the trailing comma-separated field from every data line; used to
// compare CSVs while ignoring wall-clock columns.
inline std::string drop_last_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!first) out << '\n';
        first = false;
        auto pos = line.rfind(',');
        out << (pos == std::string::npos ? line : line.substr(0, pos));
    }
    if (!csv.empty() && csv.back() == '\n') out << '\n';
    return out.str();
}

} // namespace testsupport
