#include "hapticsim/server.hpp"

#include "hapticsim/errors.hpp"
#include "hapticsim/session.hpp"
#include "hapticsim/wire.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace hapticsim {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxQueuedFrames = 512;

class Connection;

struct Registry {
  virtual ~Registry() = default;
  /// Creates or finds the session for a Hello; returns its id, or an error.
  virtual std::variant<std::string, wire::Error> join(const wire::Hello &hello,
                                                      const std::shared_ptr<Connection> &conn) = 0;
  virtual void forward(const std::string &session, const std::shared_ptr<Connection> &conn,
                       wire::ClientPayload payload) = 0;
  virtual void leave(const std::string &session, const Connection *conn) = 0;
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
  Connection(tcp::socket socket, Registry &registry)
      : executor_(socket.get_executor()), stream_(std::move(socket)), registry_(registry) {}

  void start() { detect(); }

  /// Thread-safe.
  void send(wire::ServerPayload payload) {
    asio::post(executor_, [self = shared_from_this(), p = std::move(payload)]() mutable {
      self->enqueue(std::move(p));
    });
  }

private:
  void detect() {
    stream_.async_read_some(buffer_.prepare(512), [self = shared_from_this()](
                                                      beast::error_code ec, std::size_t n) {
      if (ec)
        return self->shutdown();
      self->buffer_.commit(n);
      const std::string_view head(static_cast<const char *>(self->buffer_.data().data()),
                                  self->buffer_.size());
      const std::string_view get = "GET ";
      if (head.size() < get.size() && get.substr(0, head.size()) == head &&
          head.find('\n') == std::string_view::npos)
        return self->detect();
      if (head.substr(0, get.size()) == get)
        self->upgrade();
      else
        self->raw_lines();
    });
  }

  void upgrade() {
    http::async_read(stream_, buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec || !websocket::is_upgrade(self->request_))
                         return self->shutdown();
                       self->ws_.emplace(std::move(self->stream_));
                       self->ws_->text(true);
                       self->ws_->read_message_max(wire::kMaxMessageBytes);
                       self->ws_->async_accept(self->request_,
                                               [self](beast::error_code ec2) {
                                                 if (ec2)
                                                   return self->shutdown();
                                                 self->buffer_.clear();
                                                 self->read_frame();
                                               });
                     });
  }

  void read_frame() {
    ws_->async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec == websocket::error::message_too_big) {
        self->enqueue(wire::Error{"too_large", "frame exceeds message size limit"});
        return self->shutdown();
      }
      if (ec)
        return self->shutdown();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      self->read_frame();
    });
  }

  void raw_lines() {
    for (;;) {
      const std::string_view data(static_cast<const char *>(buffer_.data().data()), buffer_.size());
      const auto nl = data.find('\n');
      if (nl == std::string_view::npos) {
        if (data.size() > wire::kMaxMessageBytes) {
          if (!skipping_)
            enqueue(wire::Error{"too_large", "line exceeds message size limit"});
          skipping_ = true;
          buffer_.consume(buffer_.size());
        }
        break;
      }
      std::string line(data.substr(0, nl));
      buffer_.consume(nl + 1);
      if (skipping_) {
        skipping_ = false;
        continue;
      }
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (!line.empty())
        handle(line);
    }
    stream_.async_read_some(buffer_.prepare(4096), [self = shared_from_this()](
                                                       beast::error_code ec, std::size_t n) {
      if (ec)
        return self->shutdown();
      self->buffer_.commit(n);
      self->raw_lines();
    });
  }

  void handle(std::string_view text) {
    auto action = link_.accept(text);
    if (auto *err = std::get_if<wire::Error>(&action)) {
      enqueue(*err);
    } else if (auto *join = std::get_if<wire::ClientLink::Join>(&action)) {
      auto joined = registry_.join(join->hello, shared_from_this());
      if (auto *id = std::get_if<std::string>(&joined))
        link_.joined(*id);
      else
        enqueue(std::get<wire::Error>(joined));
    } else {
      registry_.forward(*link_.session(), shared_from_this(),
                        std::move(std::get<wire::ClientLink::Forward>(action).payload));
    }
  }

  void enqueue(wire::ServerPayload payload) {
    if (closed_)
      return;
    const bool is_force = std::holds_alternative<wire::ForceSample>(payload);
    if (is_force) {
      // Latest force sample wins; the front frame may already be on the wire.
      if (queue_.size() > 1 && std::holds_alternative<wire::ForceSample>(queue_.back())) {
        queue_.back() = std::move(payload);
        return;
      }
      if (queue_.size() >= kMaxQueuedFrames)
        return;
    }
    queue_.push_back(std::move(payload));
    if (queue_.size() == 1)
      write_next();
  }

  void write_next() {
    outgoing_ = wire::encode_server(queue_.front(), seq_++);
    auto done = [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec || self->closed_)
        return self->shutdown();
      self->queue_.pop_front();
      if (!self->queue_.empty())
        self->write_next();
    };
    if (ws_) {
      ws_->async_write(asio::buffer(outgoing_), std::move(done));
    } else {
      outgoing_ += '\n';
      asio::async_write(stream_, asio::buffer(outgoing_), std::move(done));
    }
  }

  void shutdown() {
    if (closed_)
      return;
    closed_ = true;
    queue_.clear();
    beast::error_code ec;
    if (ws_)
      beast::get_lowest_layer(*ws_).socket().close(ec);
    else
      stream_.socket().close(ec);
    if (link_.session())
      registry_.leave(*link_.session(), this);
  }

  asio::any_io_executor executor_;
  beast::tcp_stream stream_;
  std::optional<websocket::stream<beast::tcp_stream>> ws_;
  Registry &registry_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  wire::ClientLink link_;
  std::deque<wire::ServerPayload> queue_;
  std::string outgoing_;
  std::uint64_t seq_ = 0;
  bool skipping_ = false;
  bool closed_ = false;
};

/// Owns one Session and the thread that paces its servo ticks. All session access
/// happens on that thread; everything else talks to it through the inbox.
class SessionRunner {
public:
  SessionRunner(std::string id, const Bundle &bundle, const std::filesystem::path &log_file,
                std::uint64_t stats_every)
      : log_(log_file, std::ios::binary | std::ios::trunc),
        session_(std::move(id), bundle, &log_, stats_every), dt_(bundle.config.servo.dt) {
    if (!log_)
      throw IoError("cannot write session log " + log_file.string());
    thread_ = std::thread([this] { run(); });
  }

  ~SessionRunner() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable())
      thread_.join();
  }

  void attach(std::shared_ptr<Connection> conn) { push({Command::Attach, std::move(conn), {}}); }
  void detach(const Connection *conn) {
    Command c{Command::Detach, nullptr, {}};
    c.raw = conn;
    push(std::move(c));
  }
  void post(std::shared_ptr<Connection> conn, wire::ClientPayload payload) {
    push({Command::Message, std::move(conn), std::move(payload)});
  }

private:
  struct Command {
    enum Kind { Attach, Detach, Message } kind;
    std::shared_ptr<Connection> conn;
    wire::ClientPayload payload;
    const Connection *raw = nullptr;
  };

  void push(Command c) {
    {
      std::lock_guard lock(mutex_);
      inbox_.push_back(std::move(c));
    }
    cv_.notify_all();
  }

  void deliver(Outbound &&out, const std::shared_ptr<Connection> &sender) {
    if (sender)
      for (auto &r : out.replies)
        sender->send(std::move(r));
    for (const auto &b : out.broadcasts)
      for (const auto &client : clients_)
        client->send(b);
  }

  void process(Command &c) {
    switch (c.kind) {
    case Command::Attach:
      c.conn->send(session_.welcome());
      for (auto &e : session_.backlog())
        c.conn->send(std::move(e));
      clients_.push_back(c.conn);
      break;
    case Command::Detach:
      std::erase_if(clients_, [&](const auto &p) { return p.get() == c.raw; });
      break;
    case Command::Message: {
      const bool was_ready = session_.ready_to_tick();
      deliver(session_.handle(c.payload), c.conn);
      if (!was_ready && session_.ready_to_tick())
        resync();
      break;
    }
    }
  }

  void resync() {
    t0_ = clock::now();
    slot_ = 0;
  }

  void run() {
    std::unique_lock lock(mutex_);
    while (!stop_) {
      if (session_.ready_to_tick()) {
        const auto deadline = t0_ + std::chrono::duration_cast<clock::duration>(
                                        std::chrono::duration<double>(dt_ * slot_));
        cv_.wait_until(lock, deadline, [&] { return stop_ || !inbox_.empty(); });
      } else {
        cv_.wait(lock, [&] { return stop_ || !inbox_.empty(); });
      }
      if (stop_)
        break;
      std::deque<Command> batch;
      batch.swap(inbox_);
      lock.unlock();
      for (auto &c : batch)
        process(c);
      if (session_.ready_to_tick()) {
        const auto slot_time = t0_ + std::chrono::duration_cast<clock::duration>(
                                         std::chrono::duration<double>(dt_ * slot_));
        const auto now = clock::now();
        if (now >= slot_time) {
          const double late = std::chrono::duration<double>(now - slot_time).count();
          deliver(session_.tick(late), nullptr);
          ++slot_;
          // Sample-and-hold cannot usefully catch up a long stall; restart the schedule.
          if (late > 100 * dt_)
            resync();
        }
      }
      lock.lock();
    }
    log_.flush();
  }

  using clock = std::chrono::steady_clock;
  std::ofstream log_;
  Session session_;
  double dt_;
  std::vector<std::shared_ptr<Connection>> clients_;
  clock::time_point t0_;
  std::uint64_t slot_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Command> inbox_;
  bool stop_ = false;
  std::thread thread_;
};

} // namespace

struct Server::Impl final : Registry {
  Impl(Bundle b, ServerOptions o) : bundle(std::move(b)), options(std::move(o)) {}

  std::variant<std::string, wire::Error> join(const wire::Hello &hello,
                                              const std::shared_ptr<Connection> &conn) override {
    std::lock_guard lock(mutex);
    if (hello.session) {
      const auto it = runners.find(*hello.session);
      if (it == runners.end())
        return wire::Error{"unknown_session", "no session '" + *hello.session + "'"};
      it->second->attach(conn);
      return *hello.session;
    }
    const std::string id = "s" + std::to_string(++session_counter);
    try {
      auto runner = std::make_unique<SessionRunner>(id, bundle, options.log_dir / (id + ".jsonl"),
                                                    options.stats_every);
      runner->attach(conn);
      runners.emplace(id, std::move(runner));
    } catch (const std::exception &e) {
      return wire::Error{"session_failed", e.what()};
    }
    return id;
  }

  void forward(const std::string &session, const std::shared_ptr<Connection> &conn,
               wire::ClientPayload payload) override {
    std::lock_guard lock(mutex);
    if (const auto it = runners.find(session); it != runners.end())
      it->second->post(conn, std::move(payload));
  }

  void leave(const std::string &session, const Connection *conn) override {
    std::lock_guard lock(mutex);
    if (const auto it = runners.find(session); it != runners.end())
      it->second->detach(conn);
  }

  void accept() {
    acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec)
        return;
      std::make_shared<Connection>(std::move(socket), *this)->start();
      accept();
    });
  }

  Bundle bundle;
  ServerOptions options;
  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread net_thread;
  mutable std::mutex mutex;
  std::map<std::string, std::unique_ptr<SessionRunner>> runners;
  std::uint64_t session_counter = 0;
  std::uint16_t bound_port = 0;
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopped = false;
};

Server::Server(Bundle bundle, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(bundle), std::move(options))) {}

Server::~Server() { stop(); }

void Server::start() {
  std::error_code fs_ec;
  std::filesystem::create_directories(impl_->options.log_dir, fs_ec);
  if (fs_ec)
    throw IoError("cannot create log directory " + impl_->options.log_dir.string() + ": " +
                  fs_ec.message());

  beast::error_code ec;
  const auto address = asio::ip::make_address(impl_->options.bind_address, ec);
  if (ec)
    throw IoError("bad bind address " + impl_->options.bind_address);
  tcp::acceptor acceptor(impl_->ioc);
  const tcp::endpoint endpoint(address, impl_->options.port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec)
    acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec)
    acceptor.bind(endpoint, ec);
  if (!ec)
    acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec)
    throw IoError("cannot listen on port " + std::to_string(impl_->options.port) + ": " +
                  ec.message());
  impl_->bound_port = acceptor.local_endpoint().port();
  impl_->acceptor.emplace(std::move(acceptor));
  impl_->accept();
  impl_->net_thread = std::thread([this] { impl_->ioc.run(); });
}

void Server::stop() {
  if (!impl_)
    return;
  {
    std::lock_guard lock(impl_->stop_mutex);
    if (impl_->stopped)
      return;
    impl_->stopped = true;
  }
  impl_->stop_cv.notify_all();
  impl_->ioc.stop();
  if (impl_->net_thread.joinable())
    impl_->net_thread.join();
  std::lock_guard lock(impl_->mutex);
  impl_->runners.clear();
}

void Server::wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stop_cv.wait(lock, [&] { return impl_->stopped; });
}

std::uint16_t Server::port() const { return impl_->bound_port; }

std::size_t Server::session_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->runners.size();
}

} // namespace hapticsim
