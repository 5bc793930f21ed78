#include "glidemini/process_host.hpp"

#include <algorithm>
#include <csignal>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

#include <boost/asio.hpp>

#include "glidemini/event_log.hpp"

namespace glidemini {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

SimTime wall_now() {
  const auto d = std::chrono::system_clock::now().time_since_epoch();
  return at_ms(std::chrono::duration_cast<std::chrono::milliseconds>(d).count());
}

Expected<std::pair<std::string, std::uint16_t>, std::string> HostsTable::resolve(const std::string& address) const {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return unexpected("address lacks a port: " + address);
  const auto host = address.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    return unexpected("bad port in " + address);
  }
  if (port < 1 || port > 65535) return unexpected("bad port in " + address);
  if (auto it = entries.find(host); it != entries.end())
    return std::make_pair(it->second, static_cast<std::uint16_t>(port));
  boost::system::error_code ec;
  asio::ip::make_address(host, ec);
  if (!ec) return std::make_pair(host, static_cast<std::uint16_t>(port));
  return unexpected("unknown host " + host);
}

void HostsTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [host, ip] : entries) out << ip << ' ' << host << '\n';
}

HostsTable HostsTable::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read hosts table " + path.string());
  HostsTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string ip, host;
    if (ls >> ip >> host) t.entries[host] = ip;
  }
  return t;
}

bool port_free(std::uint16_t port) {
  asio::io_context io;
  tcp::acceptor a(io);
  boost::system::error_code ec;
  a.open(tcp::v4(), ec);
  if (ec) return false;
  a.set_option(asio::socket_base::reuse_address(true), ec);
  a.bind(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port), ec);
  return !ec;
}

class ProcessHost::Impl : public Runtime {
 public:
  Impl(Service& service, std::shared_ptr<Authority> authority, HostsTable hosts, std::filesystem::path log_path,
       std::uint64_t seed)
      : service_(service),
        authority_(std::move(authority)),
        hosts_(std::move(hosts)),
        acceptor_(io_),
        signals_(io_, SIGTERM, SIGINT),
        rng_(seed) {
    if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
    log_.open(log_path, std::ios::app);
    if (!log_) throw std::runtime_error("cannot open log " + log_path.string());
  }

  SimTime now() const override { return now_; }

  void send(const std::string& address, Message msg, ReplyHandler on_reply) override {
    msg.sender = service_.address();
    msg.seq = msg_seq_++;
    msg.sign(*authority_);
    auto target = hosts_.resolve(address);
    if (!target) {
      fail_later(std::move(on_reply), target.error());
      return;
    }
    auto& peer = peers_[address];
    if (!peer) peer = std::make_shared<Peer>(io_, target->first, target->second);
    peer->queue.push_back({msg.encode() + "\n", std::move(on_reply)});
    pump(peer);
  }

  void schedule(SimTime at, std::function<void()> fn) override {
    auto timer = std::make_shared<asio::steady_timer>(io_);
    const auto delay = std::max<std::int64_t>(0, to_ms(at) - to_ms(wall_now()));
    timer->expires_after(std::chrono::milliseconds(delay));
    timer->async_wait([this, timer, at, fn = std::move(fn)](const boost::system::error_code& ec) {
      if (ec) return;
      advance(at);
      guarded("timer", fn);
    });
  }

  void record(std::string kind, nlohmann::json payload) override {
    LogEntry e{now_, log_seq_++, service_.name(), std::move(kind), std::move(payload)};
    log_ << e.line() << '\n';
    log_.flush();
  }

  double uniform() override { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  void run() {
    const auto self = hosts_.resolve(service_.address());
    if (!self) throw std::runtime_error(service_.name() + ": " + self.error());
    boost::system::error_code ec;
    tcp::endpoint ep(asio::ip::make_address(self->first), self->second);
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
    if (ec)
      throw std::runtime_error("port-in-use: " + service_.name() + " cannot listen on " + service_.address() + " (" +
                               ec.message() + ")");

    signals_.async_wait([this](const boost::system::error_code& e, int sig) {
      if (e) return;
      advance();
      record("shutdown", {{"signal", sig}});
      io_.stop();
    });
    advance();
    record("start", {{"service", service_.name()}, {"address", service_.address()}});
    accept();
    service_.start(*this);
    io_.run();
  }

  void stop() {
    asio::post(io_, [this] { io_.stop(); });
  }

 private:
  struct Pending {
    std::string line;
    ReplyHandler on_reply;
  };
  struct Peer {
    Peer(asio::io_context& io, std::string ip, std::uint16_t port) : socket(io), ip(std::move(ip)), port(port) {}
    tcp::socket socket;
    std::string ip;
    std::uint16_t port;
    bool connected = false;
    bool connecting = false;
    bool busy = false;
    std::deque<Pending> queue;
    std::string buf;
  };

  void advance(std::optional<SimTime> at = std::nullopt) {
    now_ = std::max(now_, wall_now());
    if (at) now_ = std::max(now_, *at);
  }

  template <class F>
  void guarded(const char* where, F&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      record("handler_error", {{"where", where}, {"error", e.what()}});
    }
  }

  void fail_later(ReplyHandler cb, const std::string& why) {
    if (!cb) return;
    asio::post(io_, [this, cb = std::move(cb), why] {
      advance();
      guarded("reply", [&] { cb(error_message(Reject::Unreachable, why)); });
    });
  }

  void fail_peer(const std::shared_ptr<Peer>& peer, const std::string& why) {
    boost::system::error_code ignored;
    peer->socket.close(ignored);
    peer->socket = tcp::socket(io_);
    peer->connected = peer->connecting = peer->busy = false;
    peer->buf.clear();
    auto pending = std::move(peer->queue);
    peer->queue.clear();
    for (auto& p : pending) fail_later(std::move(p.on_reply), why);
  }

  void pump(const std::shared_ptr<Peer>& peer) {
    if (peer->busy || peer->queue.empty()) return;
    if (!peer->connected) {
      if (peer->connecting) return;
      peer->connecting = true;
      tcp::endpoint ep(asio::ip::make_address(peer->ip), peer->port);
      peer->socket.async_connect(ep, [this, peer](const boost::system::error_code& ec) {
        peer->connecting = false;
        if (ec) {
          fail_peer(peer, "connect: " + ec.message());
          return;
        }
        peer->connected = true;
        pump(peer);
      });
      return;
    }
    peer->busy = true;
    asio::async_write(peer->socket, asio::buffer(peer->queue.front().line),
                      [this, peer](const boost::system::error_code& ec, std::size_t) {
                        if (ec) {
                          fail_peer(peer, "write: " + ec.message());
                          return;
                        }
                        asio::async_read_until(
                            peer->socket, asio::dynamic_buffer(peer->buf), '\n',
                            [this, peer](const boost::system::error_code& ec2, std::size_t n) {
                              if (ec2) {
                                fail_peer(peer, "read: " + ec2.message());
                                return;
                              }
                              const auto line = peer->buf.substr(0, n - 1);
                              peer->buf.erase(0, n);
                              auto cb = std::move(peer->queue.front().on_reply);
                              peer->queue.pop_front();
                              peer->busy = false;
                              advance();
                              auto reply = Message::decode(line);
                              Message m = reply && reply->verify(*authority_)
                                              ? *reply
                                              : error_message(Reject::BadSignature, "undecodable reply");
                              if (cb) guarded("reply", [&] { cb(m); });
                              pump(peer);
                            });
                      });
  }

  void accept() {
    acceptor_.async_accept([this](const boost::system::error_code& ec, tcp::socket socket) {
      if (!ec) {
        auto conn = std::make_shared<Conn>(std::move(socket));
        serve(conn);
      }
      if (acceptor_.is_open()) accept();
    });
  }

  struct Conn {
    explicit Conn(tcp::socket s) : socket(std::move(s)) {}
    tcp::socket socket;
    std::string buf;
    std::string out;
  };

  void serve(const std::shared_ptr<Conn>& conn) {
    asio::async_read_until(
        conn->socket, asio::dynamic_buffer(conn->buf), '\n',
        [this, conn](const boost::system::error_code& ec, std::size_t n) {
          if (ec) return;
          const auto line = conn->buf.substr(0, n - 1);
          conn->buf.erase(0, n);
          advance();
          Message reply;
          auto msg = Message::decode(line);
          if (!msg) {
            record("rejected_message", {{"error", msg.error()}});
            reply = error_message(Reject::Malformed, msg.error());
          } else {
            record("recv", {{"type", std::string(to_string(msg->type))}, {"from", msg->sender}, {"seq", msg->seq}});
            reply = error_message(Reject::Malformed, "handler failed");
            guarded("handle", [&] { reply = service_.dispatch(*msg, *this); });
          }
          reply.sender = service_.address();
          reply.seq = msg_seq_++;
          reply.sign(*authority_);
          conn->out = reply.encode() + "\n";
          asio::async_write(conn->socket, asio::buffer(conn->out),
                            [this, conn](const boost::system::error_code& wec, std::size_t) {
                              if (!wec) serve(conn);
                            });
        });
  }

  Service& service_;
  std::shared_ptr<Authority> authority_;
  HostsTable hosts_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  asio::signal_set signals_;
  std::map<std::string, std::shared_ptr<Peer>> peers_;
  std::ofstream log_;
  std::uint64_t log_seq_ = 0;
  std::uint64_t msg_seq_ = 0;
  SimTime now_{};
  std::mt19937_64 rng_;
};

ProcessHost::ProcessHost(Service& service, std::shared_ptr<Authority> authority, HostsTable hosts,
                         std::filesystem::path log_path, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(service, std::move(authority), std::move(hosts), std::move(log_path), seed)) {}

ProcessHost::~ProcessHost() = default;

void ProcessHost::run() { impl_->run(); }
void ProcessHost::stop() { impl_->stop(); }

Expected<Message, std::string> rpc(const HostsTable& hosts, const std::string& address, Message msg,
                                   const Authority& authority, std::chrono::milliseconds timeout) {
  auto target = hosts.resolve(address);
  if (!target) return unexpected(target.error());
  if (msg.sender.empty()) msg.sender = "cli";
  msg.sign(authority);
  const auto line = msg.encode() + "\n";

  asio::io_context io;
  tcp::socket socket(io);
  std::string buf;
  std::optional<std::string> error;
  std::optional<Message> reply;

  tcp::endpoint ep(asio::ip::make_address(target->first), target->second);
  socket.async_connect(ep, [&](const boost::system::error_code& ec) {
    if (ec) {
      error = "connect " + address + ": " + ec.message();
      return;
    }
    asio::async_write(socket, asio::buffer(line), [&](const boost::system::error_code& wec, std::size_t) {
      if (wec) {
        error = "write: " + wec.message();
        return;
      }
      asio::async_read_until(socket, asio::dynamic_buffer(buf), '\n',
                             [&](const boost::system::error_code& rec, std::size_t n) {
                               if (rec) {
                                 error = "read: " + rec.message();
                                 return;
                               }
                               auto m = Message::decode(buf.substr(0, n - 1));
                               if (!m) error = m.error();
                               else if (!m->verify(authority)) error = "reply signature does not verify";
                               else reply = *m;
                             });
    });
  });
  io.run_for(timeout);
  if (reply) return *reply;
  if (error) return unexpected(*error);
  return unexpected("timed out waiting for " + address);
}

}  // namespace glidemini
