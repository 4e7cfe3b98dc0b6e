#pragma once

// Scripted judge wrapper that records every answered request and can be
// told to die after a number of calls, to simulate a killed run.

#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "tracecurate/corpus.hpp"
#include "tracecurate/scripted_backend.hpp"

namespace synth {

class CountingBackend final : public tracecurate::JudgeBackend {
 public:
  using Key = std::tuple<int, std::string, std::size_t, int>;

  explicit CountingBackend(long long die_after = -1) : die_after_(die_after) {}

  void load_all(const std::vector<tracecurate::DatasetRecord>& records) {
    for (const auto& r : records) inner_.load(r);
  }

  std::string name() const override { return inner_.name(); }
  bool deterministic() const override { return true; }
  std::string cache_discriminator(const tracecurate::JudgeRequest& r) const override {
    return inner_.cache_discriminator(r);
  }

  std::string complete(const tracecurate::JudgeRequest& r) override {
    {
      std::lock_guard lock(mu_);
      if (die_after_ >= 0 && answered_total_ >= die_after_) {
        throw tracecurate::BackendError("simulated crash", false);
      }
    }
    std::string reply = inner_.complete(r);
    std::lock_guard lock(mu_);
    ++answered_[Key{static_cast<int>(r.kind), r.record_id, r.index, r.attempt}];
    ++answered_total_;
    return reply;
  }

  long long answered() const {
    std::lock_guard lock(mu_);
    return answered_total_;
  }
  std::map<Key, int> answered_by_key() const {
    std::lock_guard lock(mu_);
    return answered_;
  }

 private:
  tracecurate::ScriptedJudge inner_;
  mutable std::mutex mu_;
  long long die_after_;
  long long answered_total_ = 0;
  std::map<Key, int> answered_;
};

}  // namespace synth
