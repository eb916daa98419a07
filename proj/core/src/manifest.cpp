#include "idv/manifest.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "idv/error.hpp"
#include "idv/file_util.hpp"

namespace idv {

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Query: return "query";
    case Split::Gallery: return "gallery";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "query") return Split::Query;
  if (text == "gallery") return Split::Gallery;
  throw InvalidArgument("unknown split '" + text + "' (expected train, query or gallery)");
}

std::vector<Sample> Manifest::subset(Split split) const {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

std::filesystem::path Manifest::resolve(const Sample& sample) const {
  std::filesystem::path p(sample.path);
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

int parse_int(const std::string& text, const std::string& what, const std::string& where) {
  int v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw FormatError(where + ": " + what + " '" + text + "' is not an integer");
  }
  return v;
}

}  // namespace

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                        const std::string& source, const ManifestOptions& options) {
  Manifest m;
  m.base_dir = base_dir;
  std::map<int, int> remap;
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      m.comments.push_back(line.substr(1));
      continue;
    }
    const std::string where = source + ":" + std::to_string(line_no);
    if (!have_header) {
      if (line != kManifestHeader) {
        throw FormatError(where + ": expected header '" + kManifestHeader + "', got '" + line + "'");
      }
      have_header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw FormatError(where + ": expected 5 fields, got " + std::to_string(f.size()));
    }
    Sample s;
    s.path = f[0];
    if (s.path.empty()) throw FormatError(where + ": empty path");
    s.identity = parse_int(f[1], "identity", where);
    s.camera = parse_int(f[2], "camera", where);
    try {
      s.split = parse_split(f[3]);
    } catch (const InvalidArgument& e) {
      throw FormatError(where + ": " + e.what());
    }
    const int flag = parse_int(f[4], "distractor flag", where);
    if (flag != 0 && flag != 1) throw FormatError(where + ": distractor flag must be 0 or 1");
    s.distractor = flag == 1;
    if (s.camera < 1) throw FormatError(where + ": camera id must be >= 1");
    if (s.identity < 0 && s.identity != kDistractorIdentity) {
      throw FormatError(where + ": identity must be >= 0 or -1");
    }
    if (s.identity == kDistractorIdentity && !s.distractor) {
      throw FormatError(where + ": identity -1 requires distractor=1");
    }
    if (s.distractor && s.split != Split::Gallery) {
      throw FormatError(where + ": distractors may only appear in the gallery split");
    }
    if (s.split == Split::Train) {
      auto [it, inserted] = remap.emplace(s.identity, static_cast<int>(m.train_identities.size()));
      if (inserted) m.train_identities.push_back(s.identity);
      s.label = it->second;
    }
    m.samples.push_back(std::move(s));
  }
  if (!have_header) throw FormatError(source + ": missing header line");
  if (options.require_train && m.train_identities.empty()) {
    throw FormatError(source + ": no training identities");
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path(), path.string(), options);
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream os;
  for (const auto& c : manifest.comments) os << '#' << c << '\n';
  os << kManifestHeader << '\n';
  for (const auto& s : manifest.samples) {
    os << s.path << ',' << s.identity << ',' << s.camera << ',' << to_string(s.split) << ','
       << (s.distractor ? 1 : 0) << '\n';
  }
  return os.str();
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, format_manifest(manifest));
}

}  // namespace idv
