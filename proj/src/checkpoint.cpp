#include "kaid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  auto p = base;
  p += suffix;
  return p;
}

}  // namespace

std::string component_of(const std::string& param_name) { return param_name.substr(0, param_name.find('.')); }

void save_checkpoint(const std::filesystem::path& base, const nlohmann::ordered_json& config,
                     std::span<Parameter* const> params) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "kaid-checkpoint-v1";
  manifest["precision"] = "float64";
  manifest["config"] = config;
  auto entries = nlohmann::ordered_json::array();
  std::string blob;
  std::size_t offset = 0;
  for (const auto* p : params) {
    nlohmann::ordered_json e;
    e["name"] = p->name;
    e["shape"] = p->value.shape;
    e["component"] = component_of(p->name);
    e["offset"] = offset;
    entries.push_back(std::move(e));
    const auto bytes = p->value.data.size() * sizeof(double);
    blob.append(reinterpret_cast<const char*>(p->value.data.data()), bytes);
    offset += p->value.data.size();
  }
  manifest["parameters"] = std::move(entries);
  manifest["total_values"] = offset;
  io::write_file(with_suffix(base, ".bin"), blob);
  io::write_file(with_suffix(base, ".json"), manifest.dump(1) + "\n");
}

nlohmann::json read_manifest(const std::filesystem::path& base) {
  const auto path = with_suffix(base, ".json");
  if (!std::filesystem::exists(path)) throw ValidationError("checkpoint manifest not found: " + path.string());
  try {
    auto j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "kaid-checkpoint-v1") throw ValidationError(path.string() + ": unknown checkpoint format");
    if (j.value("precision", "") != "float64") throw ValidationError(path.string() + ": unsupported precision");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed manifest: " + e.what());
  }
}

void load_parameters(const std::filesystem::path& base, std::span<Parameter* const> params) {
  const auto manifest = read_manifest(base);
  const auto& entries = manifest.at("parameters");
  if (entries.size() != params.size()) {
    throw ValidationError("checkpoint has " + std::to_string(entries.size()) + " parameters, model expects " +
                          std::to_string(params.size()));
  }
  const auto blob = io::read_file(with_suffix(base, ".bin"));
  const auto total = manifest.at("total_values").get<std::size_t>();
  if (blob.size() != total * sizeof(double)) throw ValidationError("checkpoint blob size does not match manifest");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    const auto name = entries[i].at("name").get<std::string>();
    const auto shape = entries[i].at("shape").get<std::vector<std::size_t>>();
    if (name != p->name) throw ValidationError("checkpoint parameter " + name + " where model expects " + p->name);
    if (shape != p->value.shape) {
      throw ValidationError("checkpoint shape " + shape_string(shape) + " for " + name + ", model expects " +
                            shape_string(p->value.shape));
    }
    const auto offset = entries[i].at("offset").get<std::size_t>();
    if ((offset + p->value.size()) * sizeof(double) > blob.size()) throw ValidationError("checkpoint blob truncated");
    std::memcpy(p->value.data.data(), blob.data() + offset * sizeof(double), p->value.size() * sizeof(double));
  }
}

}  // namespace kaid::nn
