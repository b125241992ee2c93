#pragma once

#include <algorithm>
#include <cstdint>

#include "dcs/types.hpp"

namespace dcs::consensus {

/// View clock with exponential backoff: timeout = base * 2^k after k
/// consecutive view timeouts, capped; one unit of commit progress resets k.
class Pacemaker {
 public:
  Pacemaker(SimTime base_timeout, SimTime max_timeout);

  View view() const { return view_; }
  void set_view(View v) { view_ = v; }

  SimTime timeout() const;
  std::uint32_t consecutive_timeouts() const { return consecutive_; }
  SimTime base_timeout() const { return base_; }

  void on_timeout() { ++consecutive_; }
  void on_progress() { consecutive_ = 0; }

 private:
  View view_ = 0;
  SimTime base_;
  SimTime cap_;
  std::uint32_t consecutive_ = 0;
};

}  // namespace dcs::consensus
