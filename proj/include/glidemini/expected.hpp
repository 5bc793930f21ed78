#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace glidemini {

template <class E>
struct Unexpected {
  E error;
};

template <class E>
Unexpected<E> unexpected(E e) {
  return Unexpected<E>{std::move(e)};
}

class BadExpectedAccess : public std::logic_error {
 public:
  BadExpectedAccess() : std::logic_error("accessed the wrong alternative of an Expected") {}
};

// Minimal stand-in for std::expected (C++23), used for the rejection paths that
// are part of normal operation (auth failures, stale sequences, ...).
template <class T, class E>
class Expected {
 public:
  Expected(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Expected(Unexpected<E> u) : v_(std::in_place_index<1>, std::move(u.error)) {}

  bool has_value() const { return v_.index() == 0; }
  explicit operator bool() const { return has_value(); }

  const T& value() const& {
    if (!has_value()) throw BadExpectedAccess{};
    return std::get<0>(v_);
  }
  T& value() & {
    if (!has_value()) throw BadExpectedAccess{};
    return std::get<0>(v_);
  }
  T&& value() && {
    if (!has_value()) throw BadExpectedAccess{};
    return std::get<0>(std::move(v_));
  }
  const E& error() const {
    if (has_value()) throw BadExpectedAccess{};
    return std::get<1>(v_);
  }

  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> v_;
};

template <class E>
class Expected<void, E> {
 public:
  Expected() = default;
  Expected(Unexpected<E> u) : err_(std::move(u.error)), ok_(false) {}

  bool has_value() const { return ok_; }
  explicit operator bool() const { return ok_; }
  const E& error() const {
    if (ok_) throw BadExpectedAccess{};
    return err_;
  }

 private:
  E err_{};
  bool ok_ = true;
};

}  // namespace glidemini
