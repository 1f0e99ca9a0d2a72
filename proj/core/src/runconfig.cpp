#include "deunet/runconfig.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace deunet {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("config key " + key + ": expected 0/1/true/false, got " + v);
}
}  // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    try {
      if (key == "data") cfg.data = val;
      else if (key == "variant") cfg.variant = variant_from_string(val);
      else if (key == "size") cfg.size = std::stoi(val);
      else if (key == "fold") cfg.fold = std::stoi(val);
      else if (key == "S") cfg.net.S = std::stoi(val);
      else if (key == "r") { cfg.net.r = std::stoi(val); cfg.train.r = cfg.net.r; }
      else if (key == "depth") cfg.net.depth = std::stoi(val);
      else if (key == "base_channels") cfg.net.base_channels = std::stoi(val);
      else if (key == "tdam_channels") cfg.net.tdam_channels = std::stoi(val);
      else if (key == "num_classes") cfg.net.num_classes = std::stoi(val);
      else if (key == "literal_reshape") cfg.net.literal_reshape = parse_bool(val, key);
      else if (key == "lr") cfg.train.lr = std::stod(val);
      else if (key == "weight_decay") cfg.train.weight_decay = std::stod(val);
      else if (key == "batch_size") cfg.train.batch_size = std::stoi(val);
      else if (key == "patience_epochs") cfg.train.patience_epochs = std::stoi(val);
      else if (key == "max_epochs") cfg.train.max_epochs = std::stoi(val);
      else if (key == "folds") cfg.train.folds = std::stoi(val);
      else if (key == "seed") cfg.train.seed = std::stoull(val);
      else
        throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": bad value for " + key + ": '" + val + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_text(buf.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "data=" << data << "\n"
     << "variant=" << to_string(variant) << "\n"
     << "size=" << size << "\n"
     << "fold=" << fold << "\n"
     << "S=" << net.S << "\n"
     << "r=" << net.r << "\n"
     << "depth=" << net.depth << "\n"
     << "base_channels=" << net.base_channels << "\n"
     << "tdam_channels=" << net.tdam_channels << "\n"
     << "num_classes=" << net.num_classes << "\n"
     << "literal_reshape=" << (net.literal_reshape ? 1 : 0) << "\n"
     << "lr=" << train.lr << "\n"
     << "weight_decay=" << train.weight_decay << "\n"
     << "batch_size=" << train.batch_size << "\n"
     << "patience_epochs=" << train.patience_epochs << "\n"
     << "max_epochs=" << train.max_epochs << "\n"
     << "folds=" << train.folds << "\n"
     << "seed=" << train.seed << "\n";
  return os.str();
}

void RunConfig::validate() const {
  net.validate();
  train.validate();
  if (fold < 0 || fold >= train.folds)
    throw std::invalid_argument("config: fold must lie in [0, folds)");
  if (size < 0) throw std::invalid_argument("config: size must be >= 0");
}

}  // namespace deunet
