#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <thread>

#include "tracecurate/error.hpp"

namespace tracecurate {

// Capped exponential backoff for retryable BackendErrors.
struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  double multiplier = 2.0;
  // Injectable so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep =
      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  std::chrono::milliseconds backoff(int retry) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 0; i < retry; ++i) ms *= multiplier;
    return std::min(max_backoff,
                    std::chrono::milliseconds(static_cast<long long>(ms)));
  }
};

template <class Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt + 1 >= policy.max_attempts) throw;
      if (policy.sleep) policy.sleep(policy.backoff(attempt));
    }
  }
}

}  // namespace tracecurate
