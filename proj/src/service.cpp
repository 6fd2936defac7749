#include "bnpreg/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <thread>

#include <httplib.h>

#include "bnpreg/error.hpp"
#include "bnpreg/session.hpp"
#include "bnpreg/text.hpp"

namespace bnpreg {

namespace fs = std::filesystem;
using nlohmann::json;

PredictiveQuery query_from_json(const json& j, bool& has_burn_in) {
  PredictiveQuery q;
  has_burn_in = false;
  try {
    if (!j.is_object()) invalid("bad_query", "the query must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (k == "focal") {
        for (const auto& f : v) {
          q.focal.emplace_back(f.at("name").get<std::string>(),
                               parse_grid(f.at("grid").get<std::string>()));
        }
      } else if (k == "functionals") {
        if (v.is_array()) {
          std::string joined;
          for (const auto& f : v) joined += (joined.empty() ? "" : ",") + f.get<std::string>();
          q.functionals = parse_functionals(joined);
        } else {
          q.functionals = parse_functionals(v.get<std::string>());
        }
      } else if (k == "profile") {
        q.profile = profile_method_from_string(v.get<std::string>());
      } else if (k == "y_grid") {
        q.y_grid = parse_grid(v.get<std::string>());
      } else if (k == "obs_weight") {
        q.obs_weight = v.get<double>();
      } else if (k == "seed") {
        q.seed = v.get<std::uint64_t>();
      } else if (k == "burn_in") {
        q.burn_in = v.get<std::uint64_t>();
        has_burn_in = true;
      } else if (k == "thin") {
        q.thin = v.get<std::uint64_t>();
      } else {
        invalid("unknown_field", "unknown query field '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    invalid("bad_query", std::string("malformed predictive query: ") + e.what());
  }
  return q;
}

namespace {

struct Handle {
  std::mutex m;
  std::optional<Session> session;
  std::thread worker;
  std::atomic<bool> cancel{false};
  std::string status = "idle";
  double progress = 0.0;
  std::string error_reason;
  std::string error_message;
};

int status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation: return 422;
    case ErrorKind::numerical: return 422;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::io: return 500;
  }
  return 500;
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump() + "\n", "application/json");
}

void send_table(httplib::Response& res, const std::string& csv) { send_json(res, {{"csv", csv}}); }

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    invalid("bad_json", "request body is not valid JSON");
  }
}

std::optional<std::uint64_t> param_u64(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) return std::nullopt;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    invalid("bad_parameter", key + " must be a non-negative integer");
  }
}

std::optional<std::uint64_t> json_u64(const json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number_unsigned()) invalid("bad_field", key + " must be a non-negative integer");
  return j.at(key).get<std::uint64_t>();
}

}  // namespace

struct Service::Impl {
  fs::path root;
  httplib::Server server;
  std::mutex registry_m;
  std::map<std::string, std::shared_ptr<Handle>> handles;

  static bool valid_id(const std::string& id) {
    static const std::regex re("[A-Za-z0-9_.-]{1,64}");
    return std::regex_match(id, re) && id != "." && id != "..";
  }

  std::shared_ptr<Handle> find(const std::string& id) {
    std::lock_guard lock(registry_m);
    if (auto it = handles.find(id); it != handles.end()) return it->second;
    if (!valid_id(id) || !fs::exists(root / id / kManifestFile)) {
      fail(ErrorKind::not_found, "unknown_session", "no session named " + id);
    }
    auto h = std::make_shared<Handle>();
    h->session = Session::open(root / id);
    handles[id] = h;
    return h;
  }

  std::shared_ptr<Handle> create(std::string id) {
    std::lock_guard lock(registry_m);
    if (id.empty()) {
      for (int k = 1;; ++k) {
        id = "session-" + std::to_string(k);
        if (!handles.count(id) && !fs::exists(root / id)) break;
      }
    }
    if (!valid_id(id)) invalid("bad_session_id", "session ids use letters, digits, '.', '_' and '-'");
    if (handles.count(id)) fail(ErrorKind::conflict, "session_exists", "session " + id + " exists");
    auto h = std::make_shared<Handle>();
    h->session = Session::create(root / id);
    handles[id] = h;
    return h;
  }

  json status_json(Handle& h) {
    const Session& s = *h.session;
    json j = {{"id", s.id()},
              {"status", h.status},
              {"progress", h.progress},
              {"draws", s.store().n_draws()},
              {"iterations", s.has_chain() ? s.chain().iteration : 0},
              {"burn_in", s.burn_in()},
              {"thin", s.thin()},
              {"seed", s.seed()},
              {"roles", s.roles() ? json(*s.roles()) : json(nullptr)},
              {"model", s.spec() ? json(*s.spec()) : json(nullptr)}};
    if (s.has_data()) {
      j["rows"] = s.data().n_rows();
      j["columns"] = s.data().names();
    }
    if (h.status == "error") j["error"] = {{"reason", h.error_reason}, {"message", h.error_message}};
    return j;
  }

  using Body = std::function<void(Handle&, const httplib::Request&, httplib::Response&)>;

  // Maps thrown errors to status codes.
  httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_json(res, {{"error", {{"reason", e.reason()}, {"message", e.what()}}}},
                  status_of(e.kind()));
      } catch (const std::exception& e) {
        send_json(res, {{"error", {{"reason", "internal"}, {"message", e.what()}}}}, 500);
      }
    };
  }

  httplib::Server::Handler reader(Body body) {
    return guarded([this, body](const httplib::Request& req, httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      std::lock_guard lock(h->m);
      body(*h, req, res);
    });
  }

  httplib::Server::Handler mutator(Body body) {
    return guarded([this, body](const httplib::Request& req, httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      std::lock_guard lock(h->m);
      if (h->status == "sampling") {
        fail(ErrorKind::conflict, "run_active", "the session is sampling");
      }
      body(*h, req, res);
      h->session->persist();
      if (h->status == "error") h->status = "idle";
      send_json(res, status_json(*h));
    });
  }

  void start_run(const std::shared_ptr<Handle>& h, const RunOptions& o) {
    RunJob job = h->session->prepare_run(o);
    if (h->worker.joinable()) h->worker.join();
    h->cancel = false;
    h->status = "sampling";
    h->progress = 0.0;
    h->worker = std::thread([h, job = std::move(job)]() mutable {
      try {
        execute_run(job, &h->cancel,
                    [&h](const RunJob& j, std::uint64_t done, std::uint64_t total) {
                      std::lock_guard lock(h->m);
                      h->session->commit(j);
                      h->progress = static_cast<double>(done) / static_cast<double>(total);
                    });
        std::lock_guard lock(h->m);
        h->status = "idle";
      } catch (const Error& e) {
        std::lock_guard lock(h->m);
        h->status = "error";
        h->error_reason = e.reason();
        h->error_message = e.what();
      } catch (const std::exception& e) {
        std::lock_guard lock(h->m);
        h->status = "error";
        h->error_reason = "internal";
        h->error_message = e.what();
      }
    });
  }

  void routes() {
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      auto h = create(body.value("id", std::string()));
      std::lock_guard lock(h->m);
      send_json(res, status_json(*h), 201);
    }));

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::vector<std::string> ids;
      if (fs::exists(root)) {
        for (const auto& e : fs::directory_iterator(root)) {
          if (fs::exists(e.path() / kManifestFile)) ids.push_back(e.path().filename().string());
        }
      }
      std::sort(ids.begin(), ids.end());
      send_json(res, {{"sessions", ids}});
    }));

    server.Get("/sessions/:id", reader([this](Handle& h, const httplib::Request&,
                                              httplib::Response& res) {
      send_json(res, status_json(h));
    }));

    server.Get("/sessions/:id/status", reader([](Handle& h, const httplib::Request&,
                                                 httplib::Response& res) {
      json j = {{"status", h.status},
                {"progress", h.progress},
                {"draws", h.session->store().n_draws()}};
      if (h.status == "error") {
        j["error"] = {{"reason", h.error_reason}, {"message", h.error_message}};
      }
      send_json(res, j);
    }));

    server.Put("/sessions/:id/data", mutator([](Handle& h, const httplib::Request& req,
                                                httplib::Response&) {
      const std::string name = req.has_param("name") ? req.get_param_value("name") : "data";
      h.session->import_csv(req.body, name);
    }));

    server.Post("/sessions/:id/transform", mutator([](Handle& h, const httplib::Request& req,
                                                      httplib::Response&) {
      h.session->transform(parse_body(req).get<TransformRecord>());
    }));

    server.Put("/sessions/:id/roles", mutator([](Handle& h, const httplib::Request& req,
                                                 httplib::Response&) {
      h.session->set_roles(parse_body(req).get<RoleAssignment>());
    }));

    server.Put("/sessions/:id/model", mutator([](Handle& h, const httplib::Request& req,
                                                 httplib::Response&) {
      h.session->set_model(parse_body(req).get<ModelSpec>());
    }));

    server.Get("/sessions/:id/model", reader([](Handle& h, const httplib::Request&,
                                                httplib::Response& res) {
      const Session& s = *h.session;
      if (!s.spec()) invalid("no_model", "no model has been specified");
      send_json(res, describe_model(*s.spec(), s.model_data()));
    }));

    server.Post("/sessions/:id/run", guarded([this](const httplib::Request& req,
                                                    httplib::Response& res) {
      auto h = find(req.path_params.at("id"));
      const json body = parse_body(req);
      RunOptions o;
      o.iterations = json_u64(body, "iterations").value_or(1000);
      o.burn_in = json_u64(body, "burn_in");
      o.thin = json_u64(body, "thin");
      o.seed = json_u64(body, "seed");
      for (const auto& [k, v] : body.items()) {
        if (k != "iterations" && k != "burn_in" && k != "thin" && k != "seed") {
          invalid("unknown_field", "unknown run field '" + k + "'");
        }
      }
      std::lock_guard lock(h->m);
      if (h->status == "sampling") fail(ErrorKind::conflict, "run_active", "a run is already active");
      start_run(h, o);
      send_json(res, {{"status", h->status}, {"progress", h->progress}}, 202);
    }));

    server.Post("/sessions/:id/cancel", reader([](Handle& h, const httplib::Request&,
                                                  httplib::Response& res) {
      h.cancel = true;
      send_json(res, {{"status", h.status}});
    }));

    server.Get("/sessions/:id/summary", reader([](Handle& h, const httplib::Request& req,
                                                  httplib::Response& res) {
      send_table(res, summary_csv(h.session->summary(param_u64(req, "burn_in"),
                                                     param_u64(req, "thin").value_or(1))));
    }));

    server.Get("/sessions/:id/diagnostics", reader([](Handle& h, const httplib::Request& req,
                                                      httplib::Response& res) {
      send_table(res, diagnostics_csv(h.session->summary(param_u64(req, "burn_in"),
                                                         param_u64(req, "thin").value_or(1))));
    }));

    server.Get("/sessions/:id/trace", reader([](Handle& h, const httplib::Request& req,
                                                httplib::Response& res) {
      if (!req.has_param("parameter")) invalid("missing_parameter", "name a parameter to trace");
      const auto window = param_u64(req, "window").value_or(4096);
      std::string csv = "iter,value\n";
      for (const auto& [it, v] : trace(h.session->store(), req.get_param_value("parameter"),
                                       static_cast<std::size_t>(window))) {
        csv += std::to_string(it) + "," + format_double(v) + "\n";
      }
      send_table(res, csv);
    }));

    server.Get("/sessions/:id/fit", reader([](Handle& h, const httplib::Request&,
                                              httplib::Response& res) {
      const FitReport f = h.session->fit();
      send_json(res, {{"csv", fit_csv(f, h.session->model_data().rows)},
                      {"summary", fit_summary_csv(f)}});
    }));

    server.Get("/sessions/:id/describe", reader([](Handle& h, const httplib::Request&,
                                                   httplib::Response& res) {
      send_table(res, describe_csv(h.session->data()));
    }));

    server.Post("/sessions/:id/predict", reader([](Handle& h, const httplib::Request& req,
                                                   httplib::Response& res) {
      bool has_burn_in = false;
      const PredictiveQuery q = query_from_json(parse_body(req), has_burn_in);
      send_table(res, h.session->predict(q, !has_burn_in).to_csv());
    }));

    server.Get("/sessions/:id/artifacts/:name", reader([](Handle& h, const httplib::Request& req,
                                                          httplib::Response& res) {
      static const std::map<std::string, std::string> files = {
          {"source", kSourceFile}, {"data", kDataFile}, {"model", kModelFile},
          {"mc1", kSamplesFile},   {"mix", kAtomsFile}, {"res", kFitFile},
          {"manifest", kManifestFile}};
      const auto it = files.find(req.path_params.at("name"));
      if (it == files.end()) fail(ErrorKind::not_found, "unknown_artifact", "no such artifact");
      const fs::path path = h.session->dir() / it->second;
      if (!fs::exists(path)) fail(ErrorKind::not_found, "missing_artifact", it->second + " not written yet");
      res.set_content(read_file(path), "text/plain");
    }));

    server.Put("/sessions/:id/artifacts/model", mutator([](Handle& h, const httplib::Request& req,
                                                           httplib::Response&) {
      h.session->load_model_text(req.body);
    }));

    server.Put("/sessions/:id/artifacts/samples", mutator([](Handle& h, const httplib::Request& req,
                                                             httplib::Response&) {
      const json body = parse_body(req);
      if (!body.contains("mc1") || !body.contains("mix")) {
        invalid("missing_field", "upload both mc1 and mix");
      }
      h.session->load_samples(body.at("mc1").get<std::string>(), body.at("mix").get<std::string>());
    }));

    server.Get("/sessions/:id/manifest", reader([](Handle& h, const httplib::Request&,
                                                   httplib::Response& res) {
      json files = json::object();
      for (const auto& [name, e] : h.session->manifest()) {
        files[name] = {{"length", e.length}, {"fnv1a64", e.fingerprint}};
      }
      send_json(res, {{"files", files}});
    }));
  }
};

Service::Service(fs::path root) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(root);
  fs::create_directories(impl_->root);
  impl_->routes();
}

Service::~Service() {
  stop();
  std::lock_guard lock(impl_->registry_m);
  for (auto& [id, h] : impl_->handles) {
    h->cancel = true;
    if (h->worker.joinable()) h->worker.join();
  }
  impl_->handles.clear();
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) {
    fail(ErrorKind::io, "bind_failed", "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

}  // namespace bnpreg
