#include "dtb/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <thread>
#include <vector>

namespace dtb {

unsigned resolve_thread_count(unsigned requested) {
    if (const char* env = std::getenv("DTB_ENGINE_THREADS"); env != nullptr && *env != '\0') {
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
        if (ec == std::errc{} && *ptr == '\0') requested = value;
    }
    if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
    return requested;
}

void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    workers = std::max(1u, workers);
    const std::size_t chunks = std::min<std::size_t>(workers, n);
    if (chunks == 1) {
        body(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(chunks);
    std::vector<std::jthread> pool;
    pool.reserve(chunks - 1);
    auto run = [&](std::size_t c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        try {
            body(begin, end);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    for (std::size_t c = 1; c < chunks; ++c) pool.emplace_back(run, c);
    run(0);
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace dtb
