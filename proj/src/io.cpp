#include "fbmheat/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fbmheat {

static_assert(std::endian::native == std::endian::little, "binary path format assumes a little-endian host");

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t file_hash(const std::filesystem::path& path) { return fnv1a64(read_text(path)); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string to_csv(const CsvTable& t) {
  std::string s;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c) s += ',';
    s += t.header[c];
  }
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) s += ',';
      s += format_double(row[c]);
    }
    s += '\n';
  }
  return s;
}

void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_text(path, to_csv(t)); }

void write_paths_csv(const std::filesystem::path& path, const FbmPathSet& set) {
  std::string s = "path,index,t";
  for (int c = 0; c < set.dim; ++c) s += ",x" + std::to_string(c);
  s += '\n';
  for (std::size_t p = 0; p < set.n_paths; ++p)
    for (std::size_t i = 0; i < set.grid.n_points(); ++i) {
      s += std::to_string(p) + ',' + std::to_string(i) + ',' + format_double(set.grid.point(i));
      for (int c = 0; c < set.dim; ++c) s += ',' + format_double(set.at(p, i, c));
      s += '\n';
    }
  write_text(path, s);
}

namespace {

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("truncated FBM1 file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void write_paths_binary(const std::filesystem::path& path, const FbmPathSet& set) {
  std::string buf = "FBM1";
  put<std::uint32_t>(buf, 1);
  put<std::uint64_t>(buf, set.n_paths);
  put<std::uint64_t>(buf, set.grid.n_steps());
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(set.dim));
  put<double>(buf, set.grid.horizon());
  put<double>(buf, set.hurst);
  put<std::uint64_t>(buf, set.seed);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(set.sampler));
  buf.append(reinterpret_cast<const char*>(set.values.data()), set.values.size() * sizeof(double));
  write_text(path, buf);
}

FbmPathSet read_paths_binary(const std::filesystem::path& path) {
  const std::string buf = read_text(path);
  if (buf.size() < 4 || buf.compare(0, 4, "FBM1") != 0) throw std::runtime_error("not an FBM1 file");
  std::size_t pos = 4;
  if (get<std::uint32_t>(buf, pos) != 1) throw std::runtime_error("unsupported FBM1 version");
  const auto n_paths = get<std::uint64_t>(buf, pos);
  const auto n_steps = get<std::uint64_t>(buf, pos);
  const auto dim = get<std::uint32_t>(buf, pos);
  const auto horizon = get<double>(buf, pos);
  const auto H = get<double>(buf, pos);
  const auto seed = get<std::uint64_t>(buf, pos);
  const auto sampler = get<std::uint32_t>(buf, pos);
  if (sampler > 1) throw std::runtime_error("FBM1: unknown sampler tag");
  FbmPathSet set{TimeGrid(horizon, n_steps), static_cast<int>(dim), Hurst(H), seed,
                 static_cast<SamplerKind>(sampler), n_paths, 0, {}};
  const std::size_t count = n_paths * (n_steps + 1) * dim;
  if (buf.size() - pos != count * sizeof(double)) throw std::runtime_error("FBM1: payload size mismatch");
  set.values.resize(count);
  std::memcpy(set.values.data(), buf.data() + pos, count * sizeof(double));
  return set;
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
  constexpr double W = 640, Hh = 420, L = 70, R = 150, T = 40, B = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmin <= xmax)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-300) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-300) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return Hh - B - (y - ymin) / (ymax - ymin) * (Hh - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(Hh) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape_xml(title) +
       "</text>\n";
  s += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W - L - R) + "\" height=\"" +
       num(Hh - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4, yv = ymin + (ymax - ymin) * k / 4;
    s += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(Hh - B + 16) + "\" text-anchor=\"middle\">" + tick(xv) +
         "</text>\n";
    s += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) +
         "</text>\n";
  }
  s += "<text x=\"" + num(L + (W - L - R) / 2) + "\" y=\"" + num(Hh - 12) + "\" text-anchor=\"middle\">" +
       escape_xml(x_label) + "</text>\n";
  s += "<text transform=\"translate(16," + num(T + (Hh - T - B) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape_xml(y_label) + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    const std::string color = colors[k % 6];
    const std::size_t n = std::min(ser.x.size(), ser.y.size());
    if (ser.markers) {
      for (std::size_t i = 0; i < n; ++i)
        if (std::isfinite(ser.x[i]) && std::isfinite(ser.y[i]))
          s += "<circle cx=\"" + num(px(ser.x[i])) + "\" cy=\"" + num(py(ser.y[i])) + "\" r=\"3\" fill=\"" +
               color + "\"/>\n";
    } else {
      s += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < n; ++i)
        if (std::isfinite(ser.x[i]) && std::isfinite(ser.y[i]))
          s += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
      s += "\"/>\n";
    }
    const double ly = T + 16 + 18 * static_cast<double>(k);
    s += "<rect x=\"" + num(W - R + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"4\" fill=\"" + color +
         "\"/>\n";
    s += "<text x=\"" + num(W - R + 30) + "\" y=\"" + num(ly - 3) + "\">" + escape_xml(ser.name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace fbmheat
