#include "dcs/consensus/pacemaker.hpp"

#include <stdexcept>

namespace dcs::consensus {

Pacemaker::Pacemaker(SimTime base_timeout, SimTime max_timeout)
    : base_(base_timeout), cap_(std::max(base_timeout, max_timeout)) {
  if (base_timeout == 0) throw std::invalid_argument("base timeout must be positive");
}

SimTime Pacemaker::timeout() const {
  if (consecutive_ >= 63) return cap_;
  SimTime t = base_ << consecutive_;
  if ((t >> consecutive_) != base_) return cap_;
  return std::min(t, cap_);
}

}  // namespace dcs::consensus
