#include "neid/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace neid {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kMomentM = "adam.m/";
constexpr const char* kMomentV = "adam.v/";

nlohmann::json arch_to_json(const ArchConfig& arch) {
  return {{"levels", arch.levels},
          {"base_channels", arch.base_channels},
          {"scale", arch.scale},
          {"variant", variant_name(arch.variant)}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig arch;
  arch.levels = j.at("levels").get<int>();
  arch.base_channels = j.at("base_channels").get<int>();
  arch.scale = j.at("scale").get<int>();
  arch.variant = variant_from_name(j.at("variant").get<std::string>());
  return arch;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["arch"] = arch_to_json(ckpt.arch);
  manifest["arch_fingerprint"] = ckpt.arch.fingerprint();
  manifest["epoch"] = ckpt.epoch;
  manifest["adam_step"] = ckpt.adam.step;
  manifest["sampler_state"] = ckpt.sampler_state;
  if (!ckpt.config_json.empty()) {
    manifest["config"] = nlohmann::json::parse(ckpt.config_json);
  }

  auto entries = nlohmann::json::array();
  std::vector<float> blob;
  auto append = [&](const std::string& name, const Tensor<float>& t) {
    entries.push_back({{"name", name},
                       {"shape", {t.n, t.c, t.h, t.w}},
                       {"offset", static_cast<std::int64_t>(blob.size())},
                       {"count", t.size()}});
    blob.insert(blob.end(), t.data.begin(), t.data.end());
  };
  for (const auto& [name, t] : ckpt.params) append(name, t);
  for (const auto& [name, t] : ckpt.adam.m) append(kMomentM + name, t);
  for (const auto& [name, t] : ckpt.adam.v) append(kMomentV + name, t);
  manifest["entries"] = std::move(entries);

  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw IoError("short write to params.bin");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw MissingFile("cannot read " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("bad manifest: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      throw CorruptCheckpoint("unsupported checkpoint format version");
    }
    ckpt.arch = arch_from_json(manifest.at("arch"));
    if (manifest.at("arch_fingerprint").get<std::uint64_t>() !=
        ckpt.arch.fingerprint()) {
      throw CorruptCheckpoint("arch fingerprint does not match arch block");
    }
    ckpt.epoch = manifest.at("epoch").get<std::int64_t>();
    ckpt.adam.step = manifest.at("adam_step").get<std::int64_t>();
    ckpt.sampler_state = manifest.at("sampler_state").get<std::string>();
    if (manifest.contains("config")) {
      ckpt.config_json = manifest.at("config").dump();
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("bad manifest: ") + e.what());
  }

  std::ifstream bin(dir / "params.bin", std::ios::binary | std::ios::ate);
  if (!bin) throw MissingFile("cannot read " + (dir / "params.bin").string());
  const std::int64_t file_floats =
      static_cast<std::int64_t>(bin.tellg()) / static_cast<std::int64_t>(sizeof(float));
  bin.seekg(0);

  std::int64_t expected_offset = 0;
  for (const auto& e : manifest.at("entries")) {
    std::string name;
    std::int64_t offset = 0, count = 0;
    int shape[4];
    try {
      name = e.at("name").get<std::string>();
      offset = e.at("offset").get<std::int64_t>();
      count = e.at("count").get<std::int64_t>();
      const auto& s = e.at("shape");
      for (int i = 0; i < 4; ++i) shape[i] = s.at(i).get<int>();
    } catch (const nlohmann::json::exception& ex) {
      throw CorruptCheckpoint(std::string("bad entry: ") + ex.what());
    }
    if (offset != expected_offset ||
        count != static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2] * shape[3] ||
        offset + count > file_floats) {
      throw CorruptCheckpoint("entry offset/length inconsistency for " + name);
    }
    expected_offset = offset + count;

    Tensor<float> t(shape[0], shape[1], shape[2], shape[3]);
    bin.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(count * sizeof(float)));
    if (!bin) throw CorruptCheckpoint("short read from params.bin");

    if (name.rfind(kMomentM, 0) == 0) {
      ckpt.adam.m.emplace(name.substr(std::string(kMomentM).size()), std::move(t));
    } else if (name.rfind(kMomentV, 0) == 0) {
      ckpt.adam.v.emplace(name.substr(std::string(kMomentV).size()), std::move(t));
    } else {
      ckpt.params.emplace(name, std::move(t));
    }
  }
  if (expected_offset != file_floats) {
    throw CorruptCheckpoint("params.bin size does not match manifest");
  }
  return ckpt;
}

}  // namespace neid
