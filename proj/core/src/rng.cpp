#include "multigrad/rng.hpp"

#include <cmath>
#include <numbers>

#include "multigrad/errors.hpp"

namespace multigrad {

double RngStream::next_normal() {
    // 1 - u keeps the log argument in (0, 1].
    double u1 = 1.0 - next_uniform();
    double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0) throw DomainError("next_below: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

Tensor RngStream::uniform(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = next_uniform();
    return t;
}

void shuffle(std::vector<std::size_t>& items, RngStream& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = std::size_t(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace multigrad
