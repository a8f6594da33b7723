#include "scene_server.hpp"

#include <stdexcept>

#include "dtb/error.hpp"
#include "dtb/io.hpp"
#include "dtb/parallel.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dtb {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, std::string body, int status = 200) {
    res.status = status;
    res.set_content(std::move(body), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    json body = {{"code", code}, {"message", message}};
    send_json(res, body.dump(), status);
}

// Runs a handler and maps exceptions to {code, message} responses.
template <class F>
httplib::Server::Handler guarded(F handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const NotFoundError& e) {
            send_error(res, 404, error_code(e), e.what());
        } catch (const Error& e) {
            send_error(res, 400, error_code(e), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "format_error", e.what());
        } catch (const std::invalid_argument& e) {
            send_error(res, 400, "invalid_argument", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal_error", e.what());
        }
    };
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
}

bool parse_flag(const std::string& text) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    throw FormatError("expected a boolean, got '" + text + "'");
}

ColorRangeMode parse_range(const std::string& text) {
    if (text == "shared") return ColorRangeMode::shared;
    if (text == "per_set") return ColorRangeMode::per_set;
    throw FormatError("color range must be 'shared' or 'per_set'");
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json body = json::parse(req.body);
    if (!body.is_object()) throw FormatError("request body must be a JSON object");
    return body;
}

std::shared_ptr<const Dataset> pick_dataset(const SessionManager& sessions, const httplib::Request& req) {
    if (auto id = param(req, "dataset")) return sessions.dataset(*id);
    return sessions.default_dataset();
}

// Applies snapshot query parameters (t, tau, compare, range, slice_*) to a session state.
SessionState apply_query(const Dataset& ds, SessionState s, const httplib::Request& req) {
    if (auto t = param(req, "t")) s = with_time(ds, std::move(s), parse_unsigned(*t, "t"));
    if (auto tau = param(req, "tau")) s = with_threshold(std::move(s), parse_double(*tau, "tau"));
    if (auto c = param(req, "compare")) s = with_compare(ds, std::move(s), parse_flag(*c));
    if (auto r = param(req, "range")) s.color_range_mode = parse_range(*r);
    if (auto axis = param(req, "slice_axis")) {
        if (*axis == "none") {
            s.slice.reset();
        } else {
            auto coord = param(req, "slice_coord");
            if (!coord) throw FormatError("slice_axis requires slice_coord");
            std::optional<double> thickness;
            if (auto th = param(req, "slice_thickness")) thickness = parse_double(*th, "slice_thickness");
            s.slice = SlicePlane::through(ds.atlas(), parse_slice_axis(*axis), parse_double(*coord, "slice_coord"),
                                          thickness);
        }
    }
    return s;
}

}  // namespace

struct SceneServer::Impl {
    std::shared_ptr<SessionManager> sessions;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> listening{false};
};

SceneServer::SceneServer(std::shared_ptr<SessionManager> sessions, unsigned workers) : impl_(std::make_unique<Impl>()) {
    if (!sessions) throw std::invalid_argument("null session manager");
    impl_->sessions = std::move(sessions);
    const unsigned n = std::max(2u, resolve_thread_count(workers));
    impl_->server.new_task_queue = [n] { return new httplib::ThreadPool(n); };

    SessionManager& sm = *impl_->sessions;
    httplib::Server& svr = impl_->server;

    svr.set_pre_routing_handler([&sm](const httplib::Request&, httplib::Response&) {
        sm.expire_idle();
        return httplib::Server::HandlerResponse::Unhandled;
    });

    svr.Get("/datasets", guarded([&sm](const httplib::Request&, httplib::Response& res) {
                send_json(res, to_json(sm.datasets()));
            }));

    svr.Post("/sessions", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                 json body = parse_body(req);
                 std::string id = body.contains("dataset_id") ? body.at("dataset_id").get<std::string>()
                                                              : sm.default_dataset()->id();
                 send_json(res, to_json(sm.open_session(id)), 201);
             }));

    svr.Get(R"(/sessions/([^/]+))", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                send_json(res, to_json(sm.state(req.matches[1])));
            }));

    svr.Get(R"(/sessions/([^/]+)/snapshot)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                std::string body;
                sm.update(req.matches[1], [&](const Dataset& ds, SessionState s) {
                    s = apply_query(ds, std::move(s), req);
                    body = to_json(snapshot(ds, s));
                    return s;
                });
                send_json(res, std::move(body));
            }));

    svr.Post(R"(/sessions/([^/]+)/select)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                 json body = parse_body(req);
                 if (!body.contains("label")) throw FormatError("missing 'label'");
                 const auto label = body.at("label").get<RegionLabel>();
                 send_json(res, to_json(sm.update(req.matches[1], [label](const Dataset& ds, SessionState s) {
                               return select_region(ds, std::move(s), label);
                           })));
             }));

    svr.Post(R"(/sessions/([^/]+)/reset)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, to_json(sm.update(req.matches[1], [](const Dataset&, SessionState s) {
                               return reset_navigation(std::move(s));
                           })));
             }));

    svr.Get(R"(/sessions/([^/]+)/navigate)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                auto from = param(req, "from");
                if (!from) throw FormatError("missing 'from'");
                const auto label = static_cast<RegionLabel>(parse_unsigned(*from, "from"));
                SessionState s = sm.state(req.matches[1]);
                send_json(res, to_json(navigate_next(*sm.dataset(s.dataset_id), label)));
            }));

    svr.Get("/slice", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                auto ds = pick_dataset(sm, req);
                auto axis = param(req, "axis");
                auto coord = param(req, "coord");
                if (!axis || !coord) throw FormatError("slice needs 'axis' and 'coord'");
                std::optional<double> thickness;
                if (auto th = param(req, "thickness")) thickness = parse_double(*th, "thickness");
                const std::size_t t = param(req, "t") ? parse_unsigned(*param(req, "t"), "t") : 0;
                const ColorRangeMode mode = param(req, "range") ? parse_range(*param(req, "range")) : ColorRangeMode::shared;
                SlicePlane plane = SlicePlane::through(ds->atlas(), parse_slice_axis(*axis),
                                                       parse_double(*coord, "coord"), thickness);
                const SignalSet& set = ds->normalized(SignalSource::biological, mode);
                send_json(res, raster_to_json(raster(ds->atlas(), set, plane, t), plane));
            }));

    svr.Get("/compare", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                auto ds = pick_dataset(sm, req);
                if (!ds->dtb()) throw NotFoundError("dataset '" + ds->id() + "' has no DTB signal");
                Scope scope = param(req, "scope") ? Scope::parse(*param(req, "scope")) : Scope::all_voxels();
                send_json(res, to_json(compare_sets(ds->biological(), *ds->dtb(), ds->atlas(), scope)));
            }));

    svr.Get("/bundles", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
                auto ds = pick_dataset(sm, req);
                if (!ds->bundles()) throw NotFoundError("dataset '" + ds->id() + "' has no bundles");
                send_json(res, serialize_bundles(*ds->bundles()));
            }));

    svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", "no such route");
    });
}

SceneServer::~SceneServer() { stop(); }

int SceneServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void SceneServer::listen() {
    impl_->listening = true;
    impl_->server.listen_after_bind();
    impl_->listening = false;
}

int SceneServer::start(const std::string& host, int port) {
    const int bound = bind(host, port);
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return bound;
}

void SceneServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

bool SceneServer::running() const { return impl_->server.is_running(); }

}  // namespace dtb
