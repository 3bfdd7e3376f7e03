#pragma once

// A single incomplete observation: each network variable is either known or
// missing. Represents the product-form subset U of the joint state space.

#include <compare>
#include <cstdint>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aiml/network.hpp"

namespace aiml {

inline constexpr int kMissing = -1;

struct CoarseCase {
  // State index per variable (network node order) or kMissing.
  std::vector<int> values;

  bool is_missing(std::size_t i) const { return values[i] == kMissing; }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (int v : values) n += v == kMissing;
    return n;
  }

  bool complete() const { return missing_count() == 0; }

  // True if x lies in the subset this case denotes.
  bool compatible(std::span<const int> x) const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] != kMissing && values[i] != x[i]) return false;
    return true;
  }

  auto operator<=>(const CoarseCase&) const = default;
  bool operator==(const CoarseCase&) const = default;
};

inline void check_case(std::span<const std::size_t> card, const CoarseCase& c) {
  if (c.values.size() != card.size()) {
    throw std::invalid_argument("case has " + std::to_string(c.values.size()) +
                                " variables, expected " + std::to_string(card.size()));
  }
  for (std::size_t i = 0; i < card.size(); ++i) {
    const int v = c.values[i];
    if (v != kMissing && (v < 0 || static_cast<std::size_t>(v) >= card[i])) {
      throw std::out_of_range("state index " + std::to_string(v) + " outside domain of variable #" +
                              std::to_string(i));
    }
  }
}

inline void check_case(const Network& net, const CoarseCase& c) {
  check_case(net.cardinalities(), c);
}

// Builds a case from (node, label) pairs; unlisted nodes and label "?" are
// missing. Throws std::out_of_range for a label outside the node's domain.
inline CoarseCase make_case(const Network& net,
                            const std::vector<std::pair<std::string, std::string>>& observed) {
  CoarseCase c{std::vector<int>(net.size(), kMissing)};
  for (const auto& [name, label] : observed) {
    const std::size_t i = net.index_of(name);
    if (label == "?") continue;
    auto s = net.state_index(i, label);
    if (!s) throw std::out_of_range("'" + label + "' is not a state of " + name);
    c.values[i] = *s;
  }
  return c;
}

inline CoarseCase complete_case(std::span<const int> x) {
  return CoarseCase{std::vector<int>(x.begin(), x.end())};
}

// Lazily enumerated full assignments compatible with a case: known values
// fixed, missing variables ranging over their whole domain (last missing
// variable fastest).
class CompatibleAssignments {
 public:
  CompatibleAssignments(const CoarseCase& c, std::span<const std::size_t> card)
      : card_(card.begin(), card.end()), base_(c.values) {
    check_case(card, c);
    for (std::size_t i = 0; i < base_.size(); ++i) {
      if (base_[i] == kMissing) {
        free_.push_back(i);
        base_[i] = 0;
      }
    }
  }

  CompatibleAssignments(const CoarseCase& c, const Network& net)
      : CompatibleAssignments(c, net.cardinalities()) {}

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Assignment;
    using difference_type = std::ptrdiff_t;
    using pointer = const Assignment*;
    using reference = const Assignment&;

    iterator() = default;
    iterator(const CompatibleAssignments* owner, bool end)
        : owner_(owner), current_(owner->base_), done_(end) {}

    reference operator*() const { return current_; }
    pointer operator->() const { return &current_; }

    iterator& operator++() {
      const auto& fr = owner_->free_;
      std::size_t k = fr.size();
      while (k > 0) {
        --k;
        const std::size_t v = fr[k];
        if (static_cast<std::size_t>(++current_[v]) < owner_->card_[v]) return *this;
        current_[v] = 0;
      }
      done_ = true;
      return *this;
    }
    void operator++(int) { ++*this; }

    bool operator==(const iterator& o) const { return done_ == o.done_; }

   private:
    const CompatibleAssignments* owner_ = nullptr;
    Assignment current_;
    bool done_ = true;
  };

  iterator begin() const { return iterator(this, false); }
  iterator end() const { return iterator(this, true); }

  // Product of missing-domain sizes, as a double to survive huge cases.
  double count() const {
    double n = 1.0;
    for (std::size_t v : free_) n *= static_cast<double>(card_[v]);
    return n;
  }

  std::span<const std::size_t> free_variables() const { return free_; }

 private:
  std::vector<std::size_t> card_;
  Assignment base_;
  std::vector<std::size_t> free_;
};

inline CompatibleAssignments compatible_assignments(const CoarseCase& c, const Network& net) {
  return CompatibleAssignments(c, net);
}

}  // namespace aiml
