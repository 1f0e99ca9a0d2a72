// Plain-text key=value run configuration. Unknown keys are rejected; the
// exact configuration is echoed into run outputs and checkpoint metadata for
// provenance.
#pragma once

#include <string>

#include "deunet/network.hpp"
#include "deunet/training.hpp"

namespace deunet {

struct RunConfig {
  std::string data;  // clip archive path
  NetVariant variant = NetVariant::full;
  int size = 0;  // optional square resize at load time; 0 keeps native
  int fold = 0;  // which cross-validation fold trains
  NetConfig net;
  TrainConfig train;

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_text(const std::string& text);
  std::string to_text() const;
  void validate() const;
};

}  // namespace deunet
