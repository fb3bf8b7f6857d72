#include <catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "proprio/session_log.hpp"
#include "serve.hpp"
#include "wire_client.hpp"

using namespace proprio;
namespace fs = std::filesystem;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

SessionConfig short_config() {
    SessionConfig cfg;
    cfg.protocol.explore_s = 5.0;
    cfg.protocol.haptic_feedback_dwell_s = 2.0;
    cfg.protocol.corrective_display_s = 2.0;
    cfg.protocol.instruction_s = 0.5;
    cfg.logging.sample_decimation = 10;
    return cfg;
}

/// Starts a server on an ephemeral port in the background.
class TestServer {
public:
    TestServer(SessionConfig cfg, fs::path out, double speed, std::optional<fs::path> static_dir = std::nullopt) {
        serve::Options opts;
        opts.config = std::move(cfg);
        opts.port = 0;
        opts.out_dir = std::move(out);
        opts.speed = speed;
        opts.max_sessions = 1;
        opts.static_dir = std::move(static_dir);
        std::promise<unsigned short> port;
        auto ready = port.get_future();
        opts.on_listening = [&port](unsigned short p) { port.set_value(p); };
        opts.on_log_written = [this](const fs::path& p) { log_path = p; };
        done_ = std::async(std::launch::async, [opts] { return serve::run(opts); });
        REQUIRE(ready.wait_for(std::chrono::seconds(10)) == std::future_status::ready);
        this->port = ready.get();
    }

    /// Waits for the server to exit; returns the number of logs written.
    int wait() {
        REQUIRE(done_.wait_for(std::chrono::seconds(120)) == std::future_status::ready);
        return done_.get();
    }

    unsigned short port = 0;
    fs::path log_path;

private:
    std::future<int> done_;
};

struct Socket {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    explicit Socket(unsigned short port) {
        tcp::resolver resolver(ioc);
        net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws.handshake("127.0.0.1", "/");
    }

    std::optional<std::string> read() {
        beast::flat_buffer buf;
        beast::error_code ec;
        ws.read(buf, ec);
        if (ec) return std::nullopt;
        return beast::buffers_to_string(buf.data());
    }
};

/// Runs the scripted client until the server closes the socket.
void drive(Socket& s, testing::ScriptedClient& client, std::promise<void>* first_state = nullptr) {
    bool signalled = false;
    while (auto msg = s.read()) {
        if (!signalled && first_state) {
            first_state->set_value();
            signalled = true;
        }
        if (auto reply = client.on_message(*msg)) s.ws.write(net::buffer(*reply));
    }
}

std::pair<int, std::string> http_get(unsigned short port, const std::string& target) {
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    return {static_cast<int>(res.result_int()), res.body()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("serve: a scripted browser client completes a session") {
    TempDir out("proprio_serve_full");
    TestServer server(short_config(), out.path, 100.0);

    testing::ScriptedClient client;
    std::promise<void> first_state;
    auto started = first_state.get_future();
    Socket socket(server.port);
    std::thread driver([&] { drive(socket, client, &first_state); });

    // a second client while the first session runs is turned away
    REQUIRE(started.wait_for(std::chrono::seconds(10)) == std::future_status::ready);
    {
        Socket second(server.port);
        const auto msg = second.read();
        REQUIRE(msg);
        CHECK(nlohmann::json::parse(*msg)["type"] == "busy");
        CHECK(!second.read());
    }

    driver.join();
    CHECK(server.wait() == 1);
    CHECK(client.done_status == "complete");
    CHECK(client.leaks == 0);
    CHECK(client.errors >= 1);  // the probe sent while input was disabled

    REQUIRE(fs::exists(server.log_path));
    const auto log = import_csv(server.log_path);
    CHECK(log.header().status == SessionStatus::Complete);
    CHECK(log.trials().size() == 110);
    // every frame the client sent was either logged as an event or rejected
    CHECK(static_cast<int>(log.events().size()) + client.errors == client.sent);
}

TEST_CASE("serve: safety button aborts into EStop") {
    TempDir out("proprio_serve_safety");
    TestServer server(short_config(), out.path, 100.0);
    testing::ScriptedClient client;
    client.safety_at = 20.0;
    client.probe_disabled = false;
    Socket socket(server.port);
    drive(socket, client);
    CHECK(server.wait() == 1);
    CHECK(client.done_status == "aborted_safety");
    const auto log = import_csv(server.log_path);
    CHECK(log.header().status == SessionStatus::AbortedSafety);
    CHECK(log.events().back().action == Action::Safety);
}

TEST_CASE("serve: client disconnect leaves an incomplete log") {
    TempDir out("proprio_serve_drop");
    TestServer server(short_config(), out.path, 20.0);
    {
        Socket socket(server.port);
        REQUIRE(socket.read());
        socket.ws.close(websocket::close_code::normal);
    }
    CHECK(server.wait() == 1);
    CHECK(import_csv(server.log_path).header().status == SessionStatus::Incomplete);
}

TEST_CASE("serve: malformed frames get an error reply") {
    TempDir out("proprio_serve_bad");
    TestServer server(short_config(), out.path, 20.0);
    {
        Socket socket(server.port);
        socket.ws.write(net::buffer(std::string("{not json")));
        bool got_error = false;
        for (int i = 0; i < 50 && !got_error; ++i) {
            const auto msg = socket.read();
            REQUIRE(msg);
            const auto j = nlohmann::json::parse(*msg);
            if (j["type"] == "error") {
                CHECK(j["code"] == "bad_message");
                got_error = true;
            }
        }
        CHECK(got_error);
        socket.ws.close(websocket::close_code::normal);
    }
    server.wait();
}

TEST_CASE("serve: static assets over HTTP") {
    TempDir out("proprio_serve_static"), assets("proprio_serve_assets");
    std::ofstream(assets.path / "index.html") << "<html>ui</html>";
    std::ofstream(out.path / "secret.txt") << "nope";
    TestServer server(short_config(), out.path, 20.0, assets.path);
    const auto [code, body] = http_get(server.port, "/");
    CHECK(code == 200);
    CHECK(body == "<html>ui</html>");
    CHECK(http_get(server.port, "/missing.js").first == 404);
    CHECK(http_get(server.port, "/../proprio_serve_static/secret.txt").first == 404);
    {
        // end the server by running one session to a disconnect
        Socket socket(server.port);
        REQUIRE(socket.read());
        socket.ws.close(websocket::close_code::normal);
    }
    server.wait();
}
