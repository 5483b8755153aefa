#include "lutdla/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "lutdla/error.hpp"

namespace lutdla::cli {
namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorKind::Configuration, what); }

double parse_real(const std::string& s, const std::string& where) {
  if (s == "inf" || s == ".inf" || s == "Inf" || s == ".Inf" || s == "infinity")
    return std::numeric_limits<double>::infinity();
  double x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size() || std::isnan(x)) bad(where + ": expected a number, got '" + s + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) bad(where + ": expected a non-negative integer, got '" + s + "'");
  return x;
}

nlohmann::json real_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

}  // namespace

Section::Section(YAML::Node node, std::string path, nlohmann::json* effective)
    : node_(std::move(node)), path_(std::move(path)), effective_(effective) {
  if (node_ && !node_.IsNull() && !node_.IsMap()) bad((path_.empty() ? std::string("config") : path_) + ": expected a mapping");
}

std::string Section::where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Section::has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

std::optional<YAML::Node> Section::scalar(const std::string& key) {
  read_.insert(key);
  if (!has(key)) return std::nullopt;
  YAML::Node n = node_[key];
  if (!n.IsScalar()) bad(where(key) + ": expected a scalar");
  return n;
}

std::optional<YAML::Node> Section::sequence(const std::string& key) {
  read_.insert(key);
  if (!has(key)) return std::nullopt;
  YAML::Node n = node_[key];
  if (n.IsScalar()) return n;  // a single value stands for a one-element list
  if (!n.IsSequence()) bad(where(key) + ": expected a list");
  for (const auto& e : n)
    if (!e.IsScalar()) bad(where(key) + ": list entries must be scalars");
  return n;
}

std::size_t Section::size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(u64(key, fallback));
}

std::uint64_t Section::u64(const std::string& key, std::uint64_t fallback) {
  const std::optional<YAML::Node> n = scalar(key);
  const std::uint64_t x = n ? parse_u64(n->Scalar(), where(key)) : fallback;
  (*effective_)[key] = x;
  return x;
}

double Section::real(const std::string& key, double fallback) {
  const std::optional<YAML::Node> n = scalar(key);
  const double x = n ? parse_real(n->Scalar(), where(key)) : fallback;
  (*effective_)[key] = real_json(x);
  return x;
}

bool Section::flag(const std::string& key, bool fallback) {
  const std::optional<YAML::Node> n = scalar(key);
  bool x = fallback;
  if (n) {
    const std::string& s = n->Scalar();
    if (s == "true") x = true;
    else if (s == "false") x = false;
    else bad(where(key) + ": expected true or false, got '" + s + "'");
  }
  (*effective_)[key] = x;
  return x;
}

std::string Section::text(const std::string& key, const std::string& fallback) {
  const std::optional<YAML::Node> n = scalar(key);
  std::string x = n ? n->Scalar() : fallback;
  (*effective_)[key] = x;
  return x;
}

std::vector<std::size_t> Section::sizes(const std::string& key, const std::vector<std::size_t>& fallback) {
  const std::optional<YAML::Node> n = sequence(key);
  std::vector<std::size_t> out;
  if (!n) out = fallback;
  else if (n->IsScalar()) out.push_back(parse_u64(n->Scalar(), where(key)));
  else for (const auto& e : *n) out.push_back(parse_u64(e.Scalar(), where(key)));
  (*effective_)[key] = out;
  return out;
}

std::vector<double> Section::reals(const std::string& key, const std::vector<double>& fallback) {
  const std::optional<YAML::Node> n = sequence(key);
  std::vector<double> out;
  if (!n) out = fallback;
  else if (n->IsScalar()) out.push_back(parse_real(n->Scalar(), where(key)));
  else for (const auto& e : *n) out.push_back(parse_real(e.Scalar(), where(key)));
  nlohmann::json j = nlohmann::json::array();
  for (double x : out) j.push_back(real_json(x));
  (*effective_)[key] = j;
  return out;
}

std::vector<std::string> Section::texts(const std::string& key, const std::vector<std::string>& fallback) {
  const std::optional<YAML::Node> n = sequence(key);
  std::vector<std::string> out;
  if (!n) out = fallback;
  else if (n->IsScalar()) out.push_back(n->Scalar());
  else for (const auto& e : *n) out.push_back(e.Scalar());
  (*effective_)[key] = out;
  return out;
}

Config::Config() : Config(YAML::Node()) {}

Config::Config(YAML::Node root) { sections_.emplace_back(std::move(root), "", effective_.get()); }

Config Config::load(const std::filesystem::path& path) {
  try {
    return Config(YAML::LoadFile(path.string()));
  } catch (const YAML::BadFile&) {
    fail(ErrorKind::InvalidInput, "cannot read config file " + path.string());
  } catch (const YAML::Exception& e) {
    bad("config " + path.string() + ": " + e.what());
  }
}

Config Config::parse(std::string_view text) {
  try {
    return Config(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& e) {
    bad(std::string("config: ") + e.what());
  }
}

Section& Config::sub(Section& parent, const std::string& key) {
  parent.read_.insert(key);
  YAML::Node n = parent.has(key) ? parent.node_[key] : YAML::Node();
  nlohmann::json& slot = (*parent.effective_)[key];
  if (slot.is_null()) slot = nlohmann::json::object();
  return sections_.emplace_back(n, parent.where(key), &slot);
}

void Config::check_unknown() const {
  for (const Section& s : sections_) {
    if (!s.node_ || !s.node_.IsMap()) continue;
    for (const auto& kv : s.node_) {
      const std::string key = kv.first.as<std::string>();
      if (!s.read_.count(key)) bad("unknown config key '" + s.where(key) + "'");
    }
  }
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lutdla::cli
