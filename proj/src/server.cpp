#include "paysim/server.hpp"

#include <chrono>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "paysim/error.hpp"
#include "paysim/simulation.hpp"

namespace paysim {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr auto kTick = std::chrono::milliseconds(10);
constexpr std::size_t kMaxQueuedMessages = 4096;

struct Outgoing {
    std::shared_ptr<const std::string> data;
    bool binary = true;
};

class ClientSession;

struct Hub {
    virtual ~Hub() = default;
    virtual std::string handle_text(const std::string& text) = 0;
    virtual void leave(ClientSession* session) = 0;
};

class ClientSession : public std::enable_shared_from_this<ClientSession> {
public:
    ClientSession(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

    void open() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return self->closed();
            self->accepted_ = true;
            self->read();
            self->flush();
        });
    }

    void send(Outgoing msg) {
        if (closing_) return;
        if (queue_.size() >= kMaxQueuedMessages && msg.binary) return;
        queue_.push_back(std::move(msg));
        if (accepted_ && queue_.size() == 1) flush();
    }

    void close() {
        if (closing_) return;
        closing_ = true;
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->closed();
            if (self->ws_.got_text()) {
                const std::string reply = self->hub_.handle_text(beast::buffers_to_string(self->buffer_.data()));
                self->send({std::make_shared<const std::string>(reply), false});
            }
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void flush() {
        if (queue_.empty() || writing_) return;
        writing_ = true;
        ws_.binary(queue_.front().binary);
        ws_.async_write(asio::buffer(*queue_.front().data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) return self->closed();
            self->queue_.pop_front();
            self->flush();
        });
    }

    void closed() {
        closing_ = true;
        hub_.leave(this);
    }

    websocket::stream<beast::tcp_stream> ws_;
    Hub& hub_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> queue_;
    bool accepted_ = false;
    bool writing_ = false;
    bool closing_ = false;
};

}  // namespace

struct LiveServer::Impl : Hub {
    Impl(Scenario scenario, const ServeOptions& opts)
        : options(opts), sim(std::move(scenario), RunOptions{std::nullopt, true, true}), acceptor(io), timer(io) {
        if (!(options.time_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "time_scale must be positive");
        beast::error_code ec;
        const auto address = asio::ip::make_address(options.bind_address, ec);
        if (ec) throw Error(ErrorCode::InvalidArgument, "bad bind address '" + options.bind_address + "'");
        const tcp::endpoint endpoint(address, options.port);
        acceptor.open(endpoint.protocol(), ec);
        if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
        if (!ec) acceptor.bind(endpoint, ec);
        if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
        if (ec) {
            throw Error(ErrorCode::PortInUse, "cannot listen on " + options.bind_address + ":" +
                                                  std::to_string(options.port) + ": " + ec.message());
        }
        bound_port = acceptor.local_endpoint().port();
    }

    void begin() {
        wall_start = std::chrono::steady_clock::now();
        accept();
        tick();
    }

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto session = std::make_shared<ClientSession>(std::move(socket), *this);
            sessions.insert(session);
            session->open();
            accept();
        });
    }

    void tick() {
        const std::chrono::duration<double, std::milli> wall = std::chrono::steady_clock::now() - wall_start;
        sim.step_until(SimTime::from_ms(wall.count() * options.time_scale));
        for (auto& packet : sim.take_wire_packets()) {
            auto data = std::make_shared<const std::string>(packet.begin(), packet.end());
            ++packets_sent;
            for (const auto& s : sessions) s->send({data, true});
        }
        publish();
        timer.expires_after(kTick);
        timer.async_wait([this](beast::error_code ec) {
            if (!ec) tick();
        });
    }

    void publish() {
        LiveSnapshot snap;
        snap.sim_ms = sim.now().ms();
        snap.packets_sent = packets_sent;
        snap.frames_captured = sim.frames().size();
        snap.clients = sessions.size();
        if (const auto* sky = sim.skyport()) {
            snap.source = sky->desktop().source();
            for (const auto& c : sky->desktop().clicks()) snap.clicks.push_back(c.at);
        }
        snap.state = to_string(sim.orchestrator().state());
        std::lock_guard lock(snapshot_mutex);
        snapshot = std::move(snap);
    }

    std::string handle_text(const std::string& text) override {
        nlohmann::ordered_json reply;
        try {
            const auto msg = nlohmann::json::parse(text);
            const std::string type = msg.at("type").get<std::string>();
            reply["type"] = type;
            if (type == "click") {
                const PixelPoint p = sim.click(msg.at("u").get<double>(), msg.at("v").get<double>());
                reply["ok"] = true;
                reply["x"] = p.x;
                reply["y"] = p.y;
            } else if (type == "switch") {
                const std::string name = msg.at("source").get<std::string>();
                const auto source = parse_video_source(name);
                if (!source) throw Error(ErrorCode::InvalidArgument, "unknown video source '" + name + "'");
                sim.switch_source(*source);
                reply["ok"] = true;
                reply["source"] = name;
            } else {
                throw Error(ErrorCode::InvalidArgument, "unknown message type '" + type + "'");
            }
        } catch (const Error& e) {
            reply["ok"] = false;
            reply["error"] = e.what();
        } catch (const nlohmann::json::exception& e) {
            reply["ok"] = false;
            reply["error"] = std::string("InvalidArgument: ") + e.what();
        }
        return reply.dump();
    }

    void leave(ClientSession* session) override {
        std::erase_if(sessions, [session](const auto& s) { return s.get() == session; });
    }

    void shutdown() {
        beast::error_code ec;
        acceptor.close(ec);
        timer.cancel();
        for (const auto& s : sessions) s->close();
        sessions.clear();
        io.stop();
    }

    ServeOptions options;
    Simulation sim;
    asio::io_context io;
    tcp::acceptor acceptor;
    asio::steady_timer timer;
    std::uint16_t bound_port = 0;
    std::chrono::steady_clock::time_point wall_start;
    std::set<std::shared_ptr<ClientSession>> sessions;
    std::uint64_t packets_sent = 0;

    mutable std::mutex snapshot_mutex;
    LiveSnapshot snapshot;
    std::thread worker;
    std::mutex stop_mutex;
    bool stopped = false;
};

LiveServer::LiveServer(Scenario scenario, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {}

LiveServer::~LiveServer() { stop(); }

std::uint16_t LiveServer::port() const { return impl_->bound_port; }

void LiveServer::run() {
    asio::post(impl_->io, [this] { impl_->begin(); });
    impl_->io.run();
}

void LiveServer::start() {
    impl_->worker = std::thread([this] { run(); });
}

void LiveServer::stop() {
    std::lock_guard lock(impl_->stop_mutex);
    if (!impl_->stopped) {
        impl_->stopped = true;
        asio::post(impl_->io, [impl = impl_.get()] { impl->shutdown(); });
    }
    if (impl_->worker.joinable() && impl_->worker.get_id() != std::this_thread::get_id()) impl_->worker.join();
}

LiveSnapshot LiveServer::snapshot() const {
    std::lock_guard lock(impl_->snapshot_mutex);
    return impl_->snapshot;
}

}  // namespace paysim
