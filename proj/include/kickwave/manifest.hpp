#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kickwave/error.hpp"

// Users of this header link OpenSSL::Crypto.
namespace kickwave {

using nlohmann::json;

inline constexpr const char* kCodeVersion = "kickwave 0.1.0";

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct OutputDigest {
  std::string file;
  std::string sha256;
  std::size_t bytes = 0;
};

struct Manifest {
  std::string config_hash;  // SHA-256 of the expanded config's JSON dump
  json config;              // expanded config, enough to replay the run
  std::vector<std::uint64_t> seeds;
  std::string code_version = kCodeVersion;
  std::vector<OutputDigest> outputs;
  double wall_seconds = 0.0;
  unsigned workers = 1;
  std::size_t untrusted = 0;  // flagged results (boundary contact, untrusted traces, unpaired estimates)
  std::vector<std::string> flags;

  // Fields that must match bit-for-bit when a run is replayed; excludes the
  // wall clock and the worker count.
  json reproducible_view() const {
    json outs = json::array();
    for (const auto& o : outputs) outs.push_back({{"file", o.file}, {"sha256", o.sha256}, {"bytes", o.bytes}});
    return {{"config_hash", config_hash}, {"seeds", seeds},         {"code_version", code_version},
            {"outputs", outs},            {"untrusted", untrusted}, {"flags", flags}};
  }

  json to_json() const {
    json j = reproducible_view();
    j["config"] = config;
    j["wall_seconds"] = wall_seconds;
    j["workers"] = workers;
    return j;
  }

  static Manifest from_json(const json& j) {
    Manifest m;
    try {
      m.config_hash = j.at("config_hash").get<std::string>();
      m.config = j.at("config");
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      m.code_version = j.at("code_version").get<std::string>();
      for (const auto& o : j.at("outputs"))
        m.outputs.push_back({o.at("file").get<std::string>(), o.at("sha256").get<std::string>(),
                             o.at("bytes").get<std::size_t>()});
      m.wall_seconds = j.value("wall_seconds", 0.0);
      m.workers = j.value("workers", 1u);
      m.untrusted = j.value("untrusted", std::size_t{0});
      m.flags = j.value("flags", std::vector<std::string>{});
    } catch (const json::exception& e) {
      throw Error(std::string("malformed manifest: ") + e.what());
    }
    return m;
  }

  static Manifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open manifest");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return from_json(json::parse(ss.str()));
    } catch (const json::parse_error&) {
      throw Error(path + ": manifest is not valid JSON");
    }
  }
};

}  // namespace kickwave
