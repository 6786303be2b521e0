#include "unbend/service.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "unbend/deform.hpp"
#include "unbend/error.hpp"
#include "unbend/image.hpp"

namespace unbend {

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::LastTwoKeyframes:
    case ErrorCode::AntipodalNormals:
    case ErrorCode::InvalidRig:
      return 409;
    case ErrorCode::OutOfRange:
      return 416;
    default:
      return 400;
  }
}

double query_double(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing query parameter '") + key + "'");
  const std::string text = req.get_param_value(key);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    throw Error(ErrorCode::InvalidArgument, std::string("query parameter '") + key + "' is not a number");
  return v;
}

int query_int(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  int v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || v < 1 || v > 4096)
    throw Error(ErrorCode::InvalidArgument, std::string("query parameter '") + key + "' must be an integer in [1, 4096]");
  return v;
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::SchemaInvalid, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::SchemaInvalid, "request body is not valid JSON");
  }
}

std::pair<std::filesystem::path, std::filesystem::path> export_paths(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "missing export path");
  std::filesystem::path data(path);
  std::filesystem::path meta = data;
  if (data.extension() == ".json") throw Error(ErrorCode::InvalidArgument, "export path must name the raw data file");
  meta.replace_extension(".json");
  return {data, meta};
}

}  // namespace

struct SessionService::Impl {
  Impl(Session s, ScalarVolume v, ServiceOptions o)
      : session(std::move(s)), volume(std::move(v)), options(std::move(o)),
        rig(std::make_shared<const DeformationRig>(session.rig)) {
    // The library default adds SO_REUSEPORT, which lets a second server share
    // a busy port instead of failing to bind.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    routes();
  }

  struct Snapshot {
    std::shared_ptr<const DeformationRig> rig;
    std::uint64_t version;
  };

  Snapshot snapshot() const {
    std::shared_lock lock(state_mutex);
    return {rig, version};
  }

  // Runs under the writer lock; publishes the new rig atomically for readers.
  template <typename F>
  Snapshot mutate(F&& change) {
    std::lock_guard writer(write_mutex);
    Session next = session;
    change(next);
    auto published = std::make_shared<const DeformationRig>(next.rig);
    std::unique_lock lock(state_mutex);
    session = std::move(next);
    rig = std::move(published);
    return {rig, ++version};
  }

  static void send_json(httplib::Response& res, nlohmann::json body, std::uint64_t v) {
    body["version"] = v;
    res.set_header("X-Rig-Version", std::to_string(v));
    res.set_content(body.dump(), "application/json");
  }

  static nlohmann::json rig_payload(const DeformationRig& r) {
    nlohmann::json j = rig_to_json(r);
    j["length"] = r.length();
    j["arclength"] = std::vector<double>(r.cumulative_arclength().begin(), r.cumulative_arclength().end());
    return j;
  }

  template <typename F>
  static httplib::Server::Handler guarded(F&& handler) {
    return [handler = std::forward<F>(handler)](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        res.status = status_for(e.code());
        res.set_content(nlohmann::json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                        "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", "SchemaInvalid"}, {"message", e.what()}}.dump(), "application/json");
      }
    };
  }

  void edit_route(const std::string& path, const char* op) {
    server.Post(path, guarded([this, op](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = parse_body(req);
      body["op"] = op;
      const RigEdit edit = edit_from_json(body);
      const auto snap = mutate([&](Session& s) { record_edit(s, edit); });
      send_json(res, rig_payload(*snap.rig), snap.version);
    }));
  }

  void routes() {
    server.Get("/rig", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      send_json(res, rig_payload(*snap.rig), snap.version);
    }));

    server.Get("/slice", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const double t = query_double(req, "t");
      const int w = query_int(req, "w", options.default_slice_size);
      const int h = query_int(req, "h", options.default_slice_size);
      const auto snap = snapshot();
      const Image2D img = cross_section(*snap.rig, volume, t, w, h);
      res.set_header("X-Rig-Version", std::to_string(snap.version));
      res.set_content(encode_png(img), "image/png");
    }));

    server.Get("/preview", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      const auto spec = budgeted_spec(default_spec(*snap.rig, volume.spacing()), options.preview_budget);
      const ScalarVolume straight = straighten(*snap.rig, volume, spec);
      nlohmann::json body;
      const char* names[3] = {"x", "y", "z"};
      for (int a = 0; a < 3; ++a) body[names[a]] = base64_encode(encode_png(max_intensity_projection(straight, a)));
      send_json(res, std::move(body), snap.version);
    }));

    server.Get("/curve", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      const DeformationRig& r = *snap.rig;
      const double step = volume.spacing().minCoeff();
      const int samples = std::max(2, static_cast<int>(std::ceil(r.length() / step)) + 1);
      FramedPolyline curve;
      for (int i = 0; i < samples; ++i) {
        const double t = r.length() * i / (samples - 1);
        curve.vertices.push_back(eval_curve(r, t));
        curve.frames.push_back(eval_frame(r, t));
      }
      nlohmann::json body = skeleton_to_json(curve);
      body["keyframe_t"] = std::vector<double>(r.cumulative_arclength().begin(), r.cumulative_arclength().end());
      send_json(res, std::move(body), snap.version);
    }));

    server.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto [data, meta] = export_paths(req.get_param_value("path"));
      const auto snap = snapshot();
      const ScalarVolume straight = straighten(*snap.rig, volume, default_spec(*snap.rig, volume.spacing()));
      export_volume(straight, data, meta);
      const auto& d = straight.dims();
      send_json(res, {{"data", data.string()}, {"meta", meta.string()}, {"dims", {d[0], d[1], d[2]}}}, snap.version);
    }));

    edit_route("/keyframe/insert", "insert");
    edit_route("/keyframe/remove", "remove");
    edit_route("/keyframe/rotate", "rotate");
    edit_route("/keyframe/center", "center");
    edit_route("/keyframe/extent", "extent");

    server.Post("/endpoints", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const EndpointSelection endpoints = endpoints_from_json(parse_body(req));
      const auto snap = mutate([&](Session& s) {
        const FramedPolyline skel = extract_skeleton(volume, endpoints, options.pipeline);
        record_refit(s, endpoints, fit_rig(skel, volume.spacing(), options.pipeline));
      });
      send_json(res, rig_payload(*snap.rig), snap.version);
    }));

    server.Post("/save", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const nlohmann::json body = parse_body(req);
      if (!body.contains("path") || !body.at("path").is_string()) throw Error(ErrorCode::SchemaInvalid, "save needs a string 'path'");
      const std::string path = body.at("path").get<std::string>();
      std::lock_guard writer(write_mutex);
      std::optional<Session> copy;
      std::uint64_t v = 0;
      {
        std::shared_lock lock(state_mutex);
        copy = session;
        v = version;
      }
      save_session(*copy, path);
      send_json(res, {{"path", path}}, v);
    }));
  }

  Session session;
  const ScalarVolume volume;
  const ServiceOptions options;
  std::shared_ptr<const DeformationRig> rig;
  std::uint64_t version = 0;
  mutable std::shared_mutex state_mutex;
  std::mutex write_mutex;
  httplib::Server server;
  std::thread worker;
  bool bound = false;
};

SessionService::SessionService(Session session, ScalarVolume volume, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(session), std::move(volume), std::move(options))) {}

SessionService::~SessionService() { stop(); }

int SessionService::bind(const std::string& host, int port) {
  int bound_port = -1;
  if (port == 0) {
    bound_port = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound_port = port;
  }
  if (bound_port <= 0) throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound_port;
}

void SessionService::run() {
  if (!impl_->bound) throw Error(ErrorCode::BindFailure, "service is not bound");
  impl_->server.listen_after_bind();
}

int SessionService::start(const std::string& host, int port) {
  const int bound_port = bind(host, port);
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound_port;
}

void SessionService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::uint64_t SessionService::version() const { return impl_->snapshot().version; }

Session SessionService::session() const {
  std::shared_lock lock(impl_->state_mutex);
  return impl_->session;
}

std::pair<std::string, int> parse_bind_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
    throw Error(ErrorCode::InvalidArgument, "bind address must be host:port, got '" + address + "'");
  int port = -1;
  const char* first = address.data() + colon + 1;
  const char* last = address.data() + address.size();
  const auto [end, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || end != last || port < 0 || port > 65535)
    throw Error(ErrorCode::InvalidArgument, "invalid port in '" + address + "'");
  return {address.substr(0, colon), port};
}

}  // namespace unbend
