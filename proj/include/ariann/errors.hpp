#pragma once

#include <stdexcept>

namespace ariann {

// The session cannot continue: peer gone, desync, bad frame or timeout.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

// A single-use preprocessing item (key batch or triple) was presented twice.
class KeyReuseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ariann
