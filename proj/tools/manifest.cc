#include "manifest.h"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace twinforge::cli {

namespace fs = std::filesystem;

std::string Sha256File(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: init failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string UtcNow() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

io::Json ToJson(const Manifest& m) {
  io::Json digests = io::Json::object();
  for (const auto& [file, sha] : m.digests) digests[file] = sha;
  return {{"format", kManifestFormat},
          {"command", m.command},
          {"argv", m.argv},
          {"tool_version", kToolVersion},
          {"seed", m.seed},
          {"config", m.config},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"outputs", std::move(digests)}};
}

Manifest ManifestFromJson(const io::Json& j) {
  if (j.value("format", "") != kManifestFormat) {
    throw std::invalid_argument("manifest: unsupported format tag");
  }
  Manifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.value("argv", std::vector<std::string>{});
  m.config = j.at("config");
  m.seed = j.value("seed", std::uint64_t{0});
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  for (const auto& [file, sha] : j.at("outputs").items()) m.digests[file] = sha.get<std::string>();
  return m;
}

std::map<std::string, std::string> DigestTree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == kManifestName) continue;
    out[rel] = Sha256File(e.path());
  }
  return out;
}

}  // namespace twinforge::cli
