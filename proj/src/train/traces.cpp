#include "svlab/train/traces.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "svlab/error.hpp"
#include "svlab/train/train.hpp"

namespace svlab {

namespace {

std::pair<const DatasetSplit*, std::size_t> locate(const Dataset& ds, std::size_t id) {
  for (auto name : {SplitName::train, SplitName::validation, SplitName::test}) {
    const auto& s = ds.split(name);
    const auto it = std::find(s.trajectory_ids.begin(), s.trajectory_ids.end(), id);
    if (it != s.trajectory_ids.end()) return {&s, static_cast<std::size_t>(it - s.trajectory_ids.begin())};
  }
  throw ContractError("unknown trajectory id " + std::to_string(id));
}

std::vector<double> scale_to_unit(const std::vector<double>& v, std::pair<double, double>& range) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  range = {*lo, *hi};
  std::vector<double> out(v.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(2.0 * (v[i] - *lo) / (*hi - *lo) - 1.0, -1.0, 1.0);
  }
  return out;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
const char* const kDashes[] = {"4 3", "1 3", "8 3 2 3", "10 4"};

}  // namespace

std::vector<std::string> overlay_names(const std::vector<std::string>& aux_names) {
  std::vector<std::string> out;
  for (const auto& n : aux_names) {
    if (n.rfind("theta", 0) != 0) out.push_back(n);
  }
  return out;
}

LatentTrace make_trace(const InnerModel& model, const OuterAE* outer, const Dataset& ds, std::size_t id,
                       const std::vector<bool>& mask) {
  const auto [split, k] = locate(ds, id);
  const std::size_t latent = model.config().latent;
  if (!mask.empty() && mask.size() != latent) throw DimensionError("trace mask width differs from the latent width");

  LatentTrace tr;
  tr.trajectory_id = id;
  std::vector<double> inputs;
  std::size_t n_rows = 0;
  if (ds.mode == DatasetMode::vectors) {
    n_rows = split->n_frames;
    for (std::size_t t = 0; t < n_rows; ++t) {
      const auto f = split->frame(k, t);
      inputs.insert(inputs.end(), f.begin(), f.end());
    }
    tr.codes = posterior_means(model, inputs, split->feature_dim);
  } else {
    if (outer == nullptr) throw ContractError("frames-mode traces need the outer model");
    n_rows = split->samples_per_trajectory(ds.shift);
    const auto& g = ds.geometry;
    Tensor x({n_rows, 2 * g.channels, g.height, g.width});
    for (std::size_t t = 0; t < n_rows; ++t) {
      const auto s = split->input_stack(k, t);
      std::copy(s.begin(), s.end(), x.data().begin() + t * s.size());
    }
    const Tensor z = outer->encode(Var(std::move(x))).value();
    tr.codes = posterior_means(model, z.values(), kOuterLatent);
  }

  for (std::size_t t = 0; t < n_rows; ++t) tr.time.push_back(static_cast<double>(t) * ds.dt_frame);
  for (std::size_t d = 0; d < latent; ++d) {
    if (mask.empty() || mask[d]) tr.dims.push_back(d);
  }
  if (tr.dims.empty()) {
    for (std::size_t d = 0; d < latent; ++d) tr.dims.push_back(d);
  }
  for (std::size_t d : tr.dims) {
    std::vector<double> series(n_rows);
    for (std::size_t t = 0; t < n_rows; ++t) series[t] = tr.codes[t * latent + d];
    tr.range.emplace_back();
    tr.scaled.push_back(scale_to_unit(series, tr.range.back()));
    tr.raw.push_back(std::move(series));
  }
  for (const auto& name : overlay_names(ds.aux_names)) {
    const auto col = static_cast<std::size_t>(std::find(ds.aux_names.begin(), ds.aux_names.end(), name) -
                                              ds.aux_names.begin());
    std::vector<double> series(n_rows);
    for (std::size_t t = 0; t < n_rows; ++t) series[t] = split->aux_row(k, t)[col];
    tr.overlay_names.push_back(name);
    tr.overlays.push_back(std::move(series));
  }
  return tr;
}

void write_trace_csv(const std::filesystem::path& path, const LatentTrace& tr) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "t";
  for (std::size_t d : tr.dims) out << ",z" << d;
  for (const auto& n : tr.overlay_names) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < tr.rows(); ++t) {
    out << tr.time[t];
    for (const auto& s : tr.scaled) out << ',' << s[t];
    for (const auto& o : tr.overlays) out << ',' << o[t];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LatentTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty trace file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  if (header.empty() || header[0] != "t") throw ParseError(path.string() + ": first column must be t");
  LatentTrace tr;
  try {
    tr.trajectory_id = std::stoull(path.stem().string());
  } catch (const std::exception&) {
  }
  std::size_t n_latent = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& name = header[c];
    const bool latent = name.size() > 1 && name[0] == 'z' &&
                        std::all_of(name.begin() + 1, name.end(), [](unsigned char ch) { return std::isdigit(ch); });
    if (latent && tr.overlay_names.empty()) {
      tr.dims.push_back(std::stoull(name.substr(1)));
      ++n_latent;
    } else {
      tr.overlay_names.push_back(name);
    }
  }
  tr.scaled.resize(n_latent);
  tr.overlays.resize(tr.overlay_names.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path.string() + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != header.size()) throw ParseError(path.string() + ": ragged row");
    tr.time.push_back(row[0]);
    for (std::size_t i = 0; i < n_latent; ++i) tr.scaled[i].push_back(row[1 + i]);
    for (std::size_t i = 0; i < tr.overlays.size(); ++i) tr.overlays[i].push_back(row[1 + n_latent + i]);
  }
  if (tr.time.empty()) throw ParseError(path.string() + ": no rows");
  tr.raw = tr.scaled;
  tr.range.assign(n_latent, {-1.0, 1.0});
  return tr;
}

void write_trace_svg(const std::filesystem::path& path, const LatentTrace& tr) {
  constexpr double w = 720, h = 360, left = 50, right = 130, top = 20, bottom = 40;
  const double t0 = tr.time.front(), t1 = std::max(tr.time.back(), t0 + 1e-12);
  const auto px = [&](double t) { return left + (t - t0) / (t1 - t0) * (w - left - right); };
  const auto py = [&](double v) { return top + (1.0 - v) / 2.0 * (h - top - bottom); };
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\"" << py(0)
      << "\" stroke=\"#ccc\"/>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w - left - right << "\" height=\""
      << h - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (w - right + left) / 2 << "\" y=\"" << h - 10 << "\" font-size=\"12\" text-anchor=\"middle\">t (s)</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << py(1) + 4 << "\" font-size=\"10\" text-anchor=\"end\">1</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << py(-1) + 4 << "\" font-size=\"10\" text-anchor=\"end\">-1</text>\n";

  const auto polyline = [&](const std::vector<double>& v, const std::string& stroke, const char* dash) {
    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"";
    if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
    svg << " points=\"";
    for (std::size_t t = 0; t < v.size(); ++t) svg << px(tr.time[t]) << ',' << py(v[t]) << ' ';
    svg << "\"/>\n";
  };
  std::size_t legend = 0;
  const auto label = [&](const std::string& text, const std::string& stroke, const char* dash) {
    const double y = top + 14 + 16 * static_cast<double>(legend++);
    svg << "<line x1=\"" << w - right + 10 << "\" y1=\"" << y - 4 << "\" x2=\"" << w - right + 34 << "\" y2=\"" << y - 4
        << "\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"";
    if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
    svg << "/>\n<text x=\"" << w - right + 40 << "\" y=\"" << y << "\" font-size=\"11\">" << text << "</text>\n";
  };
  for (std::size_t i = 0; i < tr.scaled.size(); ++i) {
    const std::string color = kPalette[i % std::size(kPalette)];
    polyline(tr.scaled[i], color, nullptr);
    label("z" + std::to_string(tr.dims[i]), color, nullptr);
  }
  for (std::size_t i = 0; i < tr.overlays.size(); ++i) {
    std::pair<double, double> range;
    const char* dash = kDashes[i % std::size(kDashes)];
    polyline(scale_to_unit(tr.overlays[i], range), "black", dash);
    label(tr.overlay_names[i], "black", dash);
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << svg.str();
  if (!out) throw IoError("write failed: " + path.string());
}

CorrelationReport trace_correlations(const LatentTrace& tr) {
  std::vector<LatentSeries> latents, overlays;
  for (std::size_t i = 0; i < tr.dims.size(); ++i) latents.push_back({"z" + std::to_string(tr.dims[i]), tr.raw[i]});
  for (std::size_t i = 0; i < tr.overlays.size(); ++i) overlays.push_back({tr.overlay_names[i], tr.overlays[i]});
  return correlation_report(latents, overlays);
}

}  // namespace svlab
