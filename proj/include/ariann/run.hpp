#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "ariann/errors.hpp"
#include "ariann/prep.hpp"
#include "ariann/session.hpp"

// Runs one program as both parties in this process, over an in-process pipe
// or a loopback TCP connection.
namespace ariann {

enum class TransportKind { kLocal, kTcp };

TransportKind parse_transport(const std::string& name);

struct RunOptions {
  TransportKind transport = TransportKind::kLocal;
  std::uint64_t dealer_seed = 1;
  std::uint64_t coin_seed = 2;
  std::optional<std::chrono::milliseconds> timeout;
  // Overrides the streaming dealer, e.g. with two BundlePrep sources.
  std::array<std::shared_ptr<PrepSource>, 2> prep;
};

template <class R>
struct RunResult {
  std::array<R, 2> out;
  std::array<RoundLedger, 2> ledger;
  std::array<PrepPlan, 2> prep_log;
};

std::pair<std::shared_ptr<Channel>, std::shared_ptr<Channel>> make_channel_pair(
    TransportKind kind, std::chrono::milliseconds timeout);

// `program(Session&)` runs once per party on its own thread. If either side
// throws, it aborts the session so the peer fails fast instead of waiting
// out the timeout, and the first error is rethrown here.
template <class Program>
auto run_two_party(Program program, const RunOptions& opt = {})
    -> RunResult<decltype(program(std::declval<Session&>()))> {
  using R = decltype(program(std::declval<Session&>()));
  const auto timeout = opt.timeout.value_or(default_timeout());
  auto [c0, c1] = make_channel_pair(opt.transport, timeout);
  std::array<std::shared_ptr<PrepSource>, 2> prep = opt.prep;
  if (!prep[0] || !prep[1]) {
    Dealer dealer(opt.dealer_seed);
    prep = {dealer.source(0), dealer.source(1)};
  }
  RunResult<R> result;
  std::array<std::exception_ptr, 2> errors;
  std::array<bool, 2> aborted_by_peer{false, false};
  auto body = [&](int j, std::shared_ptr<Channel> ch) {
    Session s(j, std::move(ch), prep[j], opt.coin_seed);
    s.set_timeout(timeout);
    try {
      result.out[j] = program(s);
    } catch (const std::exception& e) {
      errors[j] = std::current_exception();
      aborted_by_peer[j] = std::string(e.what()).rfind("peer aborted", 0) == 0;
      s.abort(e.what());
    }
    result.ledger[j] = s.ledger();
    result.prep_log[j] = s.prep_log();
    s.channel().close();
  };
  std::thread t1(body, 1, c1);
  body(0, c0);
  t1.join();
  // Prefer the error that caused the abort over the peer's reaction to it.
  for (int j = 0; j < 2; ++j) {
    if (errors[j] && !aborted_by_peer[j]) std::rethrow_exception(errors[j]);
  }
  for (int j = 0; j < 2; ++j) {
    if (errors[j]) std::rethrow_exception(errors[j]);
  }
  return result;
}

}  // namespace ariann
