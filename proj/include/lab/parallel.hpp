#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lab {

// 0 means: LAB_WORKERS if set, else 1.
inline unsigned resolve_workers(unsigned requested) {
	if (requested > 0) return requested;
	if (const char* env = std::getenv("LAB_WORKERS")) {
		try {
			int w = std::stoi(env);
			if (w > 0) return static_cast<unsigned>(w);
		} catch (...) {
		}
	}
	return 1;
}

// Runs body(i) for i in [0, count). Results must be written to slot i only.
// The exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& body) {
	workers = std::max(1u, workers);
	if (workers == 1 || count < 2) {
		for (std::size_t i = 0; i < count; ++i) body(i);
		return;
	}
	std::atomic<std::size_t> next{0};
	std::mutex mu;
	std::size_t failed_at = count;
	std::exception_ptr failure;
	auto run = [&] {
		for (;;) {
			std::size_t i = next.fetch_add(1);
			if (i >= count) return;
			{
				std::lock_guard lock(mu);
				if (i > failed_at) return;
			}
			try {
				body(i);
			} catch (...) {
				std::lock_guard lock(mu);
				if (i < failed_at) {
					failed_at = i;
					failure = std::current_exception();
				}
			}
		}
	};
	std::vector<std::thread> pool;
	unsigned n = std::min<std::size_t>(workers, count);
	for (unsigned t = 1; t < n; ++t) pool.emplace_back(run);
	run();
	for (auto& t : pool) t.join();
	if (failure) std::rethrow_exception(failure);
}

} // namespace lab
