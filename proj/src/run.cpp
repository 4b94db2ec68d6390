#include "ariann/run.hpp"

#include <future>

namespace ariann {

TransportKind parse_transport(const std::string& name) {
  if (name == "local") return TransportKind::kLocal;
  if (name == "tcp") return TransportKind::kTcp;
  throw std::invalid_argument("unknown transport '" + name + "' (expected local or tcp)");
}

std::pair<std::shared_ptr<Channel>, std::shared_ptr<Channel>> make_channel_pair(
    TransportKind kind, std::chrono::milliseconds timeout) {
  if (kind == TransportKind::kLocal) return make_local_channel_pair();
  TcpListener listener(0);
  auto client = std::async(std::launch::async, [&] {
    return tcp_connect("127.0.0.1", listener.port(), timeout);
  });
  auto server = listener.accept(timeout);
  return {server, client.get()};
}

}  // namespace ariann
