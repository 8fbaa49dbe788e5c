// HTTP + WebSocket front end for SessionRegistry on a single port.
//
//   POST   /session              body: optional partial run config -> 201 {"id"}
//   GET    /session/{id}         state snapshot
//   DELETE /session/{id}         closes the session and its streams
//   GET    /session/{id}/map     map document
//   POST   /session/{id}/goal    body {"h", "v"} -> plan summary
//   WS     /session/{id}/stream  JSON events, one per text message
//
// Errors are {"error": {"code", "message"}} with 400 for malformed
// requests, 404 for unknown sessions or routes, 422 for refused goals.
// Each connection is served by its own thread with blocking I/O.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"

#include "warenav/control_service.hpp"
#include "warenav/errors.hpp"

namespace warenav {

namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;

struct BindAddress {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
};

/// Parses "host:port", ":port" or "port".
[[nodiscard]] inline BindAddress parse_bind_address(std::string_view text) {
  BindAddress out;
  const auto colon = text.rfind(':');
  std::string_view port = text;
  if (colon != std::string_view::npos) {
    if (colon > 0) out.host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
  }
  const int p = detail::parse_int(std::string(port));
  if (p < 0 || p > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
  out.port = static_cast<unsigned short>(p);
  return out;
}

/// WARENAV_BIND if set, otherwise 127.0.0.1:8080.
[[nodiscard]] inline BindAddress bind_address_from_env() {
  const char* env = std::getenv("WARENAV_BIND");
  return env && *env ? parse_bind_address(env) : BindAddress{};
}

class ServiceServer {
 public:
  using tcp = boost::asio::ip::tcp;

  explicit ServiceServer(SessionRegistry& registry) : registry_(registry) {}
  ~ServiceServer() { stop(); }
  ServiceServer(const ServiceServer&) = delete;
  ServiceServer& operator=(const ServiceServer&) = delete;

  /// Binds and starts accepting. Returns the bound port (useful with port 0).
  unsigned short start(const BindAddress& addr) {
    const auto ip = boost::asio::ip::make_address(addr.host);
    acceptor_.open(ip.is_v6() ? tcp::v6() : tcp::v4());
    acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
    acceptor_.bind({ip, addr.port});
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    boost::asio::ip::address wake = ip;
    if (ip.is_unspecified()) {
      wake = ip.is_v6() ? boost::asio::ip::address(boost::asio::ip::address_v6::loopback())
                        : boost::asio::ip::address(boost::asio::ip::address_v4::loopback());
    }
    wake_endpoint_ = {wake, port_};
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return port_;
  }

  [[nodiscard]] unsigned short port() const { return port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    boost::system::error_code ec;
    // A blocking accept is not interrupted by close(); connect once to wake it.
    {
      boost::asio::io_context ioc;
      tcp::socket poke(ioc);
      poke.connect(wake_endpoint_, ec);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    acceptor_.close(ec);
    std::list<Connection> connections;
    {
      std::lock_guard lock(mutex_);
      for (auto& c : connections_) {
        // Streams end with a close handshake; plain HTTP reads are cut off.
        if (c.streaming) {
          c.events->close();
        } else {
          c.socket->shutdown(tcp::socket::shutdown_both, ec);
        }
      }
      connections.swap(connections_);
    }
    for (auto& c : connections) {
      if (c.thread.joinable()) c.thread.join();
    }
  }

 private:
  using Request = http::request<http::string_body>;
  using Response = http::response<http::string_body>;

  struct Connection {
    std::unique_ptr<boost::asio::io_context> ioc;
    std::unique_ptr<tcp::socket> socket;
    std::shared_ptr<EventQueue> events;
    std::atomic<bool> streaming{false};
    std::atomic<bool> finished{false};
    std::thread thread;
  };

  void accept_loop() {
    while (running_) {
      auto ioc = std::make_unique<boost::asio::io_context>();
      boost::system::error_code ec;
      tcp::socket sock = acceptor_.accept(*ioc, ec);
      if (!running_) return;
      if (ec) continue;
      std::lock_guard lock(mutex_);
      reap_finished();
      auto& c = connections_.emplace_back();
      c.ioc = std::move(ioc);
      c.socket = std::make_unique<tcp::socket>(std::move(sock));
      c.thread = std::thread([this, conn = &c] { serve(*conn); });
    }
  }

  // Caller holds mutex_.
  void reap_finished() {
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (it->finished) {
        if (it->thread.joinable()) it->thread.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve(Connection& c) {
    beast::flat_buffer buffer;
    boost::system::error_code ec;
    while (running_) {
      Request req;
      http::read(*c.socket, buffer, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        serve_stream(c, std::move(req));
        break;
      }
      Response res = route(req);
      res.keep_alive(req.keep_alive());
      res.prepare_payload();
      http::write(*c.socket, res, ec);
      if (ec || !req.keep_alive()) break;
    }
    c.socket->shutdown(tcp::socket::shutdown_send, ec);
    c.finished = true;
  }

  static std::vector<std::string> split_target(std::string_view target) {
    const auto q = target.find('?');
    if (q != std::string_view::npos) target = target.substr(0, q);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < target.size()) {
      const auto j = target.find('/', i);
      const auto end = j == std::string_view::npos ? target.size() : j;
      if (end > i) parts.emplace_back(target.substr(i, end - i));
      i = end + 1;
    }
    return parts;
  }

  static Response reply(const Request& req, http::status status, const json& body) {
    Response res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::server, "warenav");
    res.body() = body.dump();
    return res;
  }

  static http::status status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::kUnknownSession: return http::status::not_found;
      case ErrorCode::kRejected:
      case ErrorCode::kUnreachableGoal:
      case ErrorCode::kInvalidEndpoint:
      case ErrorCode::kNoPath: return http::status::unprocessable_entity;
      case ErrorCode::kTimeout: return http::status::service_unavailable;
      case ErrorCode::kParse:
      case ErrorCode::kInvalidArgument: return http::status::bad_request;
      default: return http::status::internal_server_error;
    }
  }

  static json parse_body(const Request& req) {
    if (req.body().empty()) return json::object();
    try {
      return json::parse(req.body());
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, e.what());
    }
  }

  Response route(const Request& req) {
    try {
      const auto parts = split_target(std::string_view(req.target().data(), req.target().size()));
      const auto method = req.method();
      if (parts.empty() || parts[0] != "session") {
        return reply(req, http::status::not_found, error_json(ErrorCode::kNoPath, "no such route"));
      }
      if (parts.size() == 1 && method == http::verb::post) {
        auto session = registry_.create(parse_body(req));
        return reply(req, http::status::created, json{{"id", session->id()}});
      }
      if (parts.size() == 2 && method == http::verb::get) {
        return reply(req, http::status::ok, registry_.find(parts[1])->snapshot());
      }
      if (parts.size() == 2 && method == http::verb::delete_) {
        registry_.close(parts[1]);
        return reply(req, http::status::ok, json{{"id", parts[1]}, {"closed", true}});
      }
      if (parts.size() == 3 && parts[2] == "map" && method == http::verb::get) {
        Response res = reply(req, http::status::ok, json::object());
        res.body() = registry_.find(parts[1])->map_document();
        return res;
      }
      if (parts.size() == 3 && parts[2] == "goal" && method == http::verb::post) {
        auto session = registry_.find(parts[1]);
        const json body = parse_body(req);
        if (!body.is_object() || !body.contains("h") || !body.contains("v") ||
            !body["h"].is_number_integer() || !body["v"].is_number_integer()) {
          throw Error(ErrorCode::kParse, "goal body must be {\"h\": int, \"v\": int}");
        }
        const PlanSummary plan = session->set_goal({body["h"].get<int>(), body["v"].get<int>()});
        return reply(req, http::status::ok, plan.to_json());
      }
      return reply(req, http::status::not_found, error_json(ErrorCode::kNoPath, "no such route"));
    } catch (const Error& e) {
      return reply(req, status_for(e.code()), error_json(e));
    } catch (const std::exception& e) {
      return reply(req, http::status::internal_server_error,
                   error_json(ErrorCode::kInternal, e.what()));
    }
  }

  void serve_stream(Connection& c, Request req) {
    boost::system::error_code ec;
    const auto parts = split_target(std::string_view(req.target().data(), req.target().size()));
    std::shared_ptr<Session> session;
    try {
      if (parts.size() != 3 || parts[0] != "session" || parts[2] != "stream") {
        throw Error(ErrorCode::kNoPath, "no such stream");
      }
      session = registry_.find(parts[1]);
    } catch (const Error& e) {
      Response res = reply(req, http::status::not_found, error_json(e));
      res.prepare_payload();
      http::write(*c.socket, res, ec);
      return;
    }

    websocket::stream<tcp::socket&> ws(*c.socket);
    websocket::stream_base::timeout timeouts{};
    timeouts.handshake_timeout = std::chrono::seconds(5);
    timeouts.idle_timeout = websocket::stream_base::none();
    timeouts.keep_alive_pings = false;
    ws.set_option(timeouts);
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);

    auto events = session->subscribe();
    {
      std::lock_guard lock(mutex_);
      c.events = events;
      c.streaming = true;
      if (!running_) events->close();
    }
    session.reset();

    auto& ioc = *c.ioc;
    boost::asio::steady_timer timer(ioc);
    beast::flat_buffer inbound;
    std::string outbound;
    bool writing = false;
    bool finished = false;

    std::function<void()> pump;
    std::function<void()> read_next;
    pump = [&] {
      if (writing || finished) return;
      if (auto ev = events->pop(std::chrono::milliseconds(0))) {
        outbound = ev->dump();
        writing = true;
        ws.async_write(boost::asio::buffer(outbound), [&](boost::system::error_code wec, std::size_t) {
          writing = false;
          if (wec) {
            finished = true;
            ioc.stop();
            return;
          }
          pump();
        });
      } else if (events->drained()) {
        finished = true;
        timer.cancel();
        ws.async_close(websocket::close_code::normal,
                       [&](boost::system::error_code) { ioc.stop(); });
      } else {
        timer.expires_after(std::chrono::milliseconds(5));
        timer.async_wait([&](boost::system::error_code tec) {
          if (!tec) pump();
        });
      }
    };
    // Reading keeps control frames flowing and notices the peer leaving.
    read_next = [&] {
      ws.async_read(inbound, [&](boost::system::error_code rec, std::size_t n) {
        if (rec) {
          events->close();
          if (!finished) {
            finished = true;
            timer.cancel();
            ioc.stop();
          }
          return;
        }
        inbound.consume(n);
        read_next();
      });
    };
    read_next();
    pump();
    ioc.run();
    events->close();
  }

  SessionRegistry& registry_;
  boost::asio::io_context accept_ioc_;
  tcp::acceptor acceptor_{accept_ioc_};
  std::atomic<bool> running_{false};
  unsigned short port_ = 0;
  tcp::endpoint wake_endpoint_;
  std::thread accept_thread_;
  std::mutex mutex_;
  std::list<Connection> connections_;
};

}  // namespace warenav
