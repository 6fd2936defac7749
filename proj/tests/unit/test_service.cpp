#include <doctest.h>

#include <chrono>
#include <thread>

#include "../support.hpp"
#include "bnpreg/service.hpp"
#include "bnpreg/session.hpp"

#include <httplib.h>

using namespace bnpreg;
using namespace bnpreg::testing;
using nlohmann::json;

namespace {

struct Server {
  Service service;
  int port;
  std::thread thread;

  explicit Server(const std::filesystem::path& root) : service(root), port(service.bind()) {
    thread = std::thread([this] { service.listen(); });
  }
  ~Server() {
    service.stop();
    thread.join();
  }
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

std::string reason_in(const httplib::Result& r) { return body_of(r).at("error").at("reason"); }

std::string wait_idle(httplib::Client& c, const std::string& id) {
  for (int k = 0; k < 3000; ++k) {
    const auto r = c.Get("/sessions/" + id + "/status");
    const std::string st = body_of(r).at("status");
    if (st != "sampling") return st;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return "timeout";
}

void configure(httplib::Client& c, const std::string& id, const std::string& family) {
  REQUIRE(c.Put("/sessions/" + id + "/data", to_csv(general_table()), "text/csv")->status == 200);
  REQUIRE(c.Put("/sessions/" + id + "/roles", R"({"dependent":"y","covariates":["x1","x2"]})",
                "application/json")->status == 200);
  REQUIRE(c.Put("/sessions/" + id + "/model", json{{"family", family}}.dump(), "application/json")
              ->status == 200);
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("session lifecycle over HTTP") {
  const auto root = scratch_dir("service");
  Server srv(root);
  httplib::Client c("127.0.0.1", srv.port);

  auto r = c.Post("/sessions", R"({"id":"a"})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  CHECK(body_of(r).at("status") == "idle");
  CHECK(c.Post("/sessions", R"({"id":"a"})", "application/json")->status == 409);
  CHECK(c.Post("/sessions", R"({"id":"../x"})", "application/json")->status == 422);
  CHECK(c.Post("/sessions", "{", "application/json")->status == 422);
  r = c.Get("/sessions/nope/status");
  CHECK(r->status == 404);
  CHECK(reason_in(r) == "unknown_session");
  CHECK(body_of(c.Get("/sessions")).at("sessions") == json{"a"});

  r = c.Put("/sessions/a/model", R"({"family":"ddp_mixture","bogus":1})", "application/json");
  CHECK(r->status == 422);
  CHECK(reason_in(r) == "unknown_field");
  r = c.Post("/sessions/a/run", R"({"iterations":10})", "application/json");
  CHECK(r->status == 422);
  CHECK(reason_in(r) == "no_data");

  configure(c, "a", "ddp_mixture");
  r = c.Post("/sessions/a/transform", R"({"op":"zscore","columns":["x1"]})", "application/json");
  CHECK(r->status == 200);
  CHECK(body_of(r).at("columns").back() == "Z:x1");
  CHECK(body_of(c.Get("/sessions/a/describe")).at("csv").get<std::string>().rfind("column,", 0) == 0);
  CHECK(body_of(c.Get("/sessions/a/model")).at("model").at("family") == "ddp_mixture");

  r = c.Post("/sessions/a/run", R"({"iterations":300,"burn_in":50,"thin":1,"seed":3})", "application/json");
  CHECK(r->status == 202);
  CHECK(wait_idle(c, "a") == "idle");
  auto st = body_of(c.Get("/sessions/a"));
  CHECK(st.at("draws") == 300);
  CHECK(st.at("iterations") == 300);

  CHECK(c.Post("/sessions/a/run", R"({"iterations":10,"thin":4})", "application/json")->status == 422);
  CHECK(c.Post("/sessions/a/run", R"({"iterations":10,"colour":4})", "application/json")->status == 422);

  const auto summary = body_of(c.Get("/sessions/a/summary")).at("csv").get<std::string>();
  CHECK(summary.find("\nsigma2,") != std::string::npos);
  CHECK(c.Get("/sessions/a/summary?burn_in=x")->status == 422);
  CHECK(body_of(c.Get("/sessions/a/diagnostics")).contains("csv"));
  const auto tr = body_of(c.Get("/sessions/a/trace?parameter=sigma2&window=10")).at("csv").get<std::string>();
  CHECK(std::count(tr.begin(), tr.end(), '\n') == 11);
  CHECK(c.Get("/sessions/a/trace")->status == 422);
  const auto fit = body_of(c.Get("/sessions/a/fit"));
  CHECK(fit.at("summary").get<std::string>().find("d_m,") != std::string::npos);

  r = c.Post("/sessions/a/predict",
             R"j({"focal":[{"name":"x2","grid":"-1:1:1"}],"functionals":"mean,quantile(0.9)","seed":2})j",
             "application/json");
  REQUIRE(r->status == 200);
  const auto pred = body_of(r).at("csv").get<std::string>();
  CHECK(pred.rfind("x2,mean,quantile(0.9)\n", 0) == 0);
  CHECK(std::count(pred.begin(), pred.end(), '\n') == 4);
  r = c.Post("/sessions/a/predict", R"({"focal":[{"name":"x2","grid":"0:0.001:1"}],"functionals":"mean"})",
             "application/json");
  CHECK(r->status == 422);
  CHECK(reason_in(r) == "grid_too_large");

  // Artifacts re-uploaded into a fresh session reproduce the manifest.
  const auto model = c.Get("/sessions/a/artifacts/model")->body;
  const auto mc1 = c.Get("/sessions/a/artifacts/mc1")->body;
  const auto mix = c.Get("/sessions/a/artifacts/mix")->body;
  const auto source = c.Get("/sessions/a/artifacts/source")->body;
  CHECK(c.Get("/sessions/a/artifacts/secrets")->status == 404);
  REQUIRE(c.Post("/sessions", R"({"id":"b"})", "application/json")->status == 201);
  CHECK(c.Put("/sessions/b/data", source, "text/csv")->status == 200);
  CHECK(c.Put("/sessions/b/artifacts/model", model, "text/plain")->status == 200);
  CHECK(c.Put("/sessions/b/artifacts/samples", json{{"mc1", mc1}, {"mix", mix}}.dump(), "application/json")
            ->status == 200);
  CHECK(body_of(c.Get("/sessions/b/manifest")) == body_of(c.Get("/sessions/a/manifest")));
}

TEST_CASE("runs can be cancelled and block mutation") {
  const auto root = scratch_dir("cancel");
  Server srv(root);
  httplib::Client c("127.0.0.1", srv.port);
  REQUIRE(c.Post("/sessions", R"({"id":"s"})", "application/json")->status == 201);
  configure(c, "s", "infinite_probits");

  auto r = c.Post("/sessions/s/run", R"({"iterations":1000000})", "application/json");
  CHECK(r->status == 202);
  CHECK(body_of(r).at("status") == "sampling");
  r = c.Post("/sessions/s/run", R"({"iterations":10})", "application/json");
  CHECK(r->status == 409);
  CHECK(reason_in(r) == "run_active");
  CHECK(c.Put("/sessions/s/model", R"({"family":"linear"})", "application/json")->status == 409);
  CHECK(c.Post("/sessions/s/cancel")->status == 200);
  CHECK(wait_idle(c, "s") == "idle");
  const auto st = body_of(c.Get("/sessions/s"));
  const std::uint64_t draws = st.at("draws");
  CHECK(draws < 1000000);
  CHECK(st.at("iterations") == draws);

  // The committed state survives a restart of the service.
  const Session reopened = Session::open(root / "s");
  CHECK(reopened.store().n_draws() == draws);
}

}  // TEST_SUITE
