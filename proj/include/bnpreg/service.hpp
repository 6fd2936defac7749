#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "bnpreg/predictive.hpp"

namespace bnpreg {

// Local HTTP service over the session directories under `root`. Requests and
// responses are JSON envelopes; tables travel as CSV text inside them and
// artifact downloads are the raw files.
class Service {
 public:
  explicit Service(std::filesystem::path root);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host = "127.0.0.1", int port = 0);
  // Serves until stop(); blocks.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// {"focal": [{"name": "x", "grid": "-2:.5:2"}], "functionals": "mean,quantile(0.9)",
//  "profile": "grand_mean", "y_grid": "...", "obs_weight": 1, "seed": 1,
//  "burn_in": n, "thin": 1}. Sets `has_burn_in` when the request names one.
PredictiveQuery query_from_json(const nlohmann::json& j, bool& has_burn_in);

}  // namespace bnpreg
