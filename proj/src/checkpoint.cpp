#include "disent/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "disent/errors.hpp"

namespace disent {

using nlohmann::json;

std::string checkpoint_to_json(const ParamStore& params) {
  json entries = json::object();
  for (const auto& [name, tensor] : params) {
    entries[name] = {{"shape", tensor.shape()}, {"data", tensor.storage()}};
  }
  return json{{"params", entries}}.dump(1) + "\n";
}

ParamStore checkpoint_from_json(const std::string& text) {
  ParamStore params;
  try {
    const json doc = json::parse(text);
    for (const auto& [name, entry] : doc.at("params").items()) {
      params.emplace(name, Tensor(entry.at("shape").get<Shape>(),
                                  entry.at("data").get<std::vector<double>>()));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
  return params;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace disent
