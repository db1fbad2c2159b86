#include "nlv/cli/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

namespace nlv::cli {

namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
  std::ostringstream s;
  for (unsigned i = 0; i < n; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(d[i]);
  return s.str();
}

class Digest {
 public:
  Digest() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  ~Digest() { EVP_MD_CTX_free(ctx_); }
  Digest(const Digest&) = delete;
  Digest& operator=(const Digest&) = delete;

  void update(const char* p, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, p, n) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw std::runtime_error("sha256 final failed");
    return to_hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Digest d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Digest d;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    d.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

std::string version_string() {
  std::ostringstream s;
  s << "nlv 1.0.0; eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION
    << "; " << OPENSSL_VERSION_TEXT << "; nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << "."
    << NLOHMANN_JSON_VERSION_MINOR << "." << NLOHMANN_JSON_VERSION_PATCH;
  return s.str();
}

void write_manifest(Manifest m, const std::filesystem::path& out_dir, const std::vector<std::string>& files) {
  for (const std::string& f : files) {
    const auto p = out_dir / f;
    m.files.push_back({f, std::filesystem::file_size(p), sha256_file(p)});
  }
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["status"] = m.status;
  j["failed_invariants"] = m.failed;
  j["seed"] = m.seed;
  j["deterministic"] = m.deterministic;
  j["threads"] = m.threads;
  j["wall_seconds"] = m.wall_seconds;
  j["versions"] = version_string();
  j["config"] = m.config;
  j["summary"] = m.summary;
  j["files"] = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : m.files)
    j["files"].push_back({{"path", e.path}, {"bytes", e.bytes}, {"sha256", e.sha256}});
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace nlv::cli
