#include "serve.hpp"

#include <atomic>
#include <deque>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "proprio/session.hpp"
#include "proprio/wire.hpp"

namespace proprio::serve {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

std::string_view mime_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

class Server;

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, Server& server, bool busy) : ws_(std::move(socket)), server_(server), busy_(busy) {}

    void run(http::request<http::string_body> req);

    /// Thread-safe: queues a text frame on the connection's strand.
    void send(std::string msg) {
        net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)]() mutable {
            if (self->closed_) return;
            self->queue_.push_back(std::move(msg));
            if (self->queue_.size() == 1) self->do_write();
        });
    }

    /// Thread-safe: closes once the queue has drained.
    void close() {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            self->closing_ = true;
            if (self->queue_.empty()) self->do_close();
        });
    }

    void attach(std::shared_ptr<wire::RemoteParticipant> p) { participant_ = std::move(p); }

private:
    void on_accept(beast::error_code ec);

    void do_read() {
        ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            if (participant_) participant_->disconnect();
            return;
        }
        const std::string text = beast::buffers_to_string(buf_.data());
        buf_.consume(buf_.size());
        if (participant_) {
            const auto d = wire::decode_client(text);
            if (d.action) {
                participant_->push(*d.action);
            } else {
                send(wire::encode_error("bad_message", d.error));
            }
        }
        do_read();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->queue_.clear();
                if (self->participant_) self->participant_->disconnect();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) {
                self->do_write();
            } else if (self->closing_) {
                self->do_close();
            }
        });
    }

    void do_close() {
        if (closed_) return;
        closed_ = true;
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buf_;
    std::deque<std::string> queue_;
    bool closing_ = false;
    bool closed_ = false;
    Server& server_;
    bool busy_;
    std::shared_ptr<wire::RemoteParticipant> participant_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, Server& server) : stream_(std::move(socket)), server_(server) {}

    void run() {
        http::async_read(stream_, buf_, req_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

private:
    void on_read(beast::error_code ec);
    void serve_file();

    beast::tcp_stream stream_;
    beast::flat_buffer buf_;
    http::request<http::string_body> req_;
    std::shared_ptr<http::response<http::string_body>> res_;
    Server& server_;
};

class Server {
public:
    explicit Server(const Options& opts) : opts_(opts), acceptor_(ioc_), signals_(ioc_, SIGINT, SIGTERM) {
        const tcp::endpoint ep(net::ip::make_address("127.0.0.1"), opts.port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
        signals_.async_wait([this](beast::error_code, int) { shutdown(); });
    }

    int run() {
        const unsigned short port = acceptor_.local_endpoint().port();
        if (opts_.on_listening) opts_.on_listening(port);
        do_accept();
        ioc_.run();
        if (stopper_.joinable()) stopper_.join();
        std::vector<std::thread> threads;
        {
            std::lock_guard lk(mu_);
            threads.swap(threads_);
        }
        for (auto& t : threads)
            if (t.joinable()) t.join();
        return written_;
    }

    const Options& options() const { return opts_; }

    /// Claims the single session slot.
    bool try_begin() {
        bool expected = false;
        return active_.compare_exchange_strong(expected, true);
    }

    void release() { active_ = false; }

    void start_session(const std::shared_ptr<WsSession>& ws) {
        SessionConfig cfg = opts_.config;
        const int index = started_++;
        if (index > 0) cfg.participant_id += "-" + std::to_string(index + 1);
        std::weak_ptr<WsSession> weak = ws;
        auto participant = std::make_shared<wire::RemoteParticipant>([weak](std::string m) {
            if (auto s = weak.lock()) s->send(std::move(m));
        });
        ws->attach(participant);
        {
            std::lock_guard lk(mu_);
            participants_.push_back(participant);
        }
        std::lock_guard lk(mu_);
        threads_.emplace_back([this, cfg, participant, ws] {
            try {
                wire::RealTimePacer pacer(opts_.speed);
                SessionRunner runner(cfg, *participant, &pacer);
                const SessionLog log = runner.run();
                std::filesystem::create_directories(opts_.out_dir);
                const auto path = opts_.out_dir / log_file_name(log);
                export_csv(log, path);
                ++written_;
                std::cerr << "session " << cfg.participant_id << ": " << to_string(log.header().status) << ", log "
                          << path.string() << "\n";
                if (opts_.on_log_written) opts_.on_log_written(path);
            } catch (const std::exception& e) {
                std::cerr << "error: session " << cfg.participant_id << ": " << e.what() << "\n";
                ws->send(wire::encode_error("internal", e.what()));
            }
            ws->close();
            finished();
        });
    }

private:
    void do_accept() {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<HttpSession>(std::move(socket), *this)->run();
            do_accept();
        });
    }

    void finished() {
        const int done = ++finished_;
        active_ = false;
        if (opts_.max_sessions > 0 && done >= opts_.max_sessions) net::post(ioc_, [this] { shutdown(); });
    }

    void shutdown() {
        beast::error_code ec;
        acceptor_.close(ec);
        signals_.cancel(ec);
        {
            std::lock_guard lk(mu_);
            for (auto& p : participants_)
                if (auto s = p.lock()) s->disconnect();
        }
        // let queued frames and close handshakes go out before stopping
        if (stopper_.joinable()) return;
        stopper_ = std::thread([this] {
            std::vector<std::thread> threads;
            {
                std::lock_guard lk(mu_);
                threads.swap(threads_);
            }
            for (auto& t : threads)
                if (t.joinable()) t.join();
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
            ioc_.stop();
        });
    }

    Options opts_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    net::signal_set signals_;
    std::atomic<bool> active_{false};
    std::atomic<int> started_{0};
    std::atomic<int> finished_{0};
    std::atomic<int> written_{0};
    std::mutex mu_;
    std::vector<std::thread> threads_;
    std::vector<std::weak_ptr<wire::RemoteParticipant>> participants_;
    std::thread stopper_;
};

void WsSession::run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
}

void WsSession::on_accept(beast::error_code ec) {
    if (ec) {
        if (!busy_) server_.release();
        return;
    }
    if (busy_) {
        send(wire::encode_busy());
        close();
        return;
    }
    server_.start_session(shared_from_this());
    do_read();
}

void HttpSession::on_read(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
        const bool busy = !server_.try_begin();
        std::make_shared<WsSession>(stream_.release_socket(), server_, busy)->run(std::move(req_));
        return;
    }
    serve_file();
}

void HttpSession::serve_file() {
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(false);
    const auto& dir = server_.options().static_dir;
    std::string target(req_.target());
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target.back() == '/') target += "index.html";

    const bool safe = target.front() == '/' && target.find("..") == std::string::npos;
    std::string body;
    std::filesystem::path path;
    bool found = false;
    if (dir && safe && req_.method() == http::verb::get) {
        path = *dir / target.substr(1);
        std::ifstream in(path, std::ios::binary);
        if (in && std::filesystem::is_regular_file(path)) {
            std::ostringstream ss;
            ss << in.rdbuf();
            body = ss.str();
            found = true;
        }
    }
    if (found) {
        res->result(http::status::ok);
        res->set(http::field::content_type, std::string(mime_type(path)));
        res->body() = std::move(body);
    } else {
        res->result(http::status::not_found);
        res->set(http::field::content_type, "text/plain");
        res->body() = "not found\n";
    }
    res->prepare_payload();
    res_ = res;
    http::async_write(stream_, *res_, [self = shared_from_this()](beast::error_code, std::size_t) {
        beast::error_code ec;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
}

}  // namespace

int run(const Options& opts) {
    opts.config.validate();
    Server server(opts);
    return server.run();
}

}  // namespace proprio::serve
