#pragma once

#include "hapticsim/config.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace hapticsim {

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 7600; // 0 picks an ephemeral port
  std::filesystem::path log_dir = "sessions";
  std::uint64_t stats_every = 1000; // ticks between Stats broadcasts
};

/// Interactive session server. One port accepts both newline-delimited JSON over a raw
/// socket and WebSocket upgrades (detected from the first request line). Each Hello
/// without a session id creates a session with its own servo thread and log file
/// `<log_dir>/<session_id>.jsonl`; a Hello naming a session attaches to it and receives
/// Welcome plus the procedure event backlog.
class Server {
public:
  Server(Bundle bundle, ServerOptions options);
  ~Server();
  Server(const Server &) = delete;
  Server &operator=(const Server &) = delete;

  /// Binds and starts serving in background threads. Throws IoError if the port is in
  /// use or the log directory is not writable.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  std::uint16_t port() const;
  std::size_t session_count() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace hapticsim
