#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "curvkit/curvature.hpp"
#include "curvkit/kfac.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace curvkit;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

struct CommonOptions {
  std::string net_path;
  std::string data_spec;
  std::string loss = "mse";
  std::string reduction = "mean";
  std::string flatten = "cvec";
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::size_t mc_samples = 1;
};

LossConfig loss_config(const CommonOptions& opt) {
  LossConfig cfg;
  if (opt.loss == "mse") {
    cfg.criterion = Criterion::SquareLoss;
  } else if (opt.loss == "ce") {
    cfg.criterion = Criterion::SoftmaxCrossEntropy;
  } else {
    throw std::runtime_error("unknown loss: " + opt.loss);
  }
  if (opt.reduction == "sum") {
    cfg.reduction = Reduction::Sum;
  } else if (opt.reduction == "mean") {
    cfg.reduction = Reduction::Mean;
  } else {
    throw std::runtime_error("unknown reduction: " + opt.reduction);
  }
  return cfg;
}

FlattenOrder flatten_order(const CommonOptions& opt) {
  if (opt.flatten == "cvec") return FlattenOrder::Cvec;
  if (opt.flatten == "rvec") return FlattenOrder::Rvec;
  throw std::runtime_error("unknown flatten order: " + opt.flatten);
}

// `path` or `synthetic:seed=S,n=N`
Dataset resolve_dataset(const CommonOptions& opt, const Network& net,
                        Criterion criterion) {
  const std::string prefix = "synthetic:";
  if (opt.data_spec.rfind(prefix, 0) == 0) {
    std::uint64_t seed = 0;
    std::size_t n = 100;
    std::string rest = opt.data_spec.substr(prefix.size());
    std::size_t pos = 0;
    while (pos < rest.size()) {
      std::size_t comma = rest.find(',', pos);
      std::string kv = rest.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("bad synthetic data spec: " + opt.data_spec);
      }
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "seed") {
        seed = std::stoull(val);
      } else if (key == "n") {
        n = std::stoul(val);
      } else {
        throw std::runtime_error("bad synthetic data key: " + key);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return synthetic_dataset(seed, n, net.input_dim(), net.output_dim(),
                             criterion);
  }
  return load_dataset_csv(opt.data_spec, net.input_dim(), criterion);
}

// 8-bit PGM of log10(|v| + 1e-12), linearly mapped to 0..255.
void save_heatmap_pgm(const Matrix& m, const std::string& path) {
  std::vector<double> mapped(m.size());
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < m.size(); ++i) {
    mapped[i] = std::log10(std::abs(m.values()[i]) + 1e-12);
    lo = std::min(lo, mapped[i]);
    hi = std::max(hi, mapped[i]);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
  for (double v : mapped) {
    const int px = static_cast<int>(255.0 * (v - lo) / range + 0.5);
    f.put(static_cast<char>(px < 0 ? 0 : (px > 255 ? 255 : px)));
  }
}

void save_json(const json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

json block_boundaries(const Network& net) {
  json out = json::array();
  std::size_t offset = 0;
  for (std::size_t l : net.linear_layer_indices()) {
    const std::size_t p = net.layer_param_count(l);
    out.push_back({{"layer", l}, {"offset", offset}, {"size", p}});
    offset += p;
  }
  return out;
}

json common_metadata(const CommonOptions& opt, const Network& net,
                     const LossConfig& cfg, std::size_t n_data) {
  return json{
      {"loss", opt.loss},
      {"reduction", opt.reduction},
      {"flatten", opt.flatten},
      {"num_data", n_data},
      {"reduction_factor",
       risk_reduction_factor(cfg, n_data, net.output_dim())},
      {"seed", opt.seed},
  };
}

int run_curvature(const CommonOptions& opt, const std::string& kind,
                  int layer) {
  const Network net = load_network_json(opt.net_path);
  const LossConfig cfg = loss_config(opt);
  const FlattenOrder order = flatten_order(opt);
  const Dataset data = resolve_dataset(opt, net, cfg.criterion);
  fs::create_directories(opt.out_dir);

  Matrix result;
  json meta = common_metadata(opt, net, cfg, data.size());
  meta["kind"] = kind;
  if (layer >= 0) {
    const auto l = static_cast<std::size_t>(layer);
    if (kind == "ggn") {
      result = ggn_block(net, data, cfg, l, order).matrix;
    } else if (kind == "fisher-mc") {
      result =
          mc_fisher_block(net, data, cfg, l, order, opt.mc_samples, opt.seed)
              .matrix;
      meta["mc_samples"] = opt.mc_samples;
    } else if (kind == "fisher-emp") {
      result = empirical_fisher_block(net, data, cfg, l, order).matrix;
    } else {
      throw std::runtime_error("per-layer output unsupported for kind " + kind);
    }
    meta["layer"] = l;
  } else {
    if (kind == "ggn") {
      result = ggn_full(net, data, cfg, order);
    } else if (kind == "fisher-mc") {
      result = mc_fisher_full(net, data, cfg, order, opt.mc_samples, opt.seed);
      meta["mc_samples"] = opt.mc_samples;
    } else if (kind == "fisher-emp") {
      result = empirical_fisher_full(net, data, cfg, order);
    } else if (kind == "hessian-fd") {
      result = hessian_full_fd(net, data, cfg, order);
    } else {
      throw std::runtime_error("unknown curvature kind: " + kind);
    }
    meta["block_boundaries"] = block_boundaries(net);
  }
  meta["rows"] = result.rows();
  meta["cols"] = result.cols();

  const fs::path base = fs::path(opt.out_dir) / ("curvature_" + kind);
  save_csv(result, base.string() + ".csv");
  save_heatmap_pgm(result, base.string() + ".pgm");
  save_json(meta, base.string() + ".meta.json");
  std::cout << "wrote " << base.string() << ".{csv,pgm,meta.json} ("
            << result.rows() << "x" << result.cols() << ")\n";
  return 0;
}

CurvatureKind parse_kind(const std::string& kind, const CommonOptions& opt) {
  if (kind == "ggn") return CurvatureKind::ggn();
  if (kind == "fisher-mc")
    return CurvatureKind::mc_fisher(opt.mc_samples, opt.seed);
  if (kind == "fisher-emp") return CurvatureKind::empirical();
  throw std::runtime_error("unknown KFAC curvature kind: " + kind);
}

int run_kfac(const CommonOptions& opt, const std::string& kind_name) {
  const Network net = load_network_json(opt.net_path);
  const LossConfig cfg = loss_config(opt);
  const FlattenOrder order = flatten_order(opt);
  const Dataset data = resolve_dataset(opt, net, cfg.criterion);
  const CurvatureKind kind = parse_kind(kind_name, opt);
  fs::create_directories(opt.out_dir);

  std::string summary = "layer,residual_frobenius,residual_spectral\n";
  for (std::size_t l : net.linear_layer_indices()) {
    const KfacBlock block = kfac_block(net, data, cfg, l, kind, order, opt.seed);
    const CurvatureBlock exact = curvature_block(net, data, cfg, l, order, kind);
    const double res_f = kfac_residual(block, exact, ResidualMetric::Frobenius);
    const double res_s = kfac_residual(block, exact, ResidualMetric::Spectral);

    const fs::path base =
        fs::path(opt.out_dir) / ("kfac_layer" + std::to_string(l));
    save_csv(block.input_factor, base.string() + "_A.csv");
    save_csv(block.grad_output_factor, base.string() + "_B.csv");
    const Matrix dense = kfac_materialize(block);
    save_heatmap_pgm(dense, base.string() + ".pgm");
    save_heatmap_pgm(exact.matrix, base.string() + "_exact.pgm");

    json meta = common_metadata(opt, net, cfg, data.size());
    meta["kind"] = kind_name;
    meta["layer"] = l;
    meta["mc_samples"] = kind.m_samples;
    meta["a_normalizer"] = "R";
    meta["b_normalizer"] =
        kind.tag == CurvatureKindTag::McFisher ? "N*M" : "N";
    save_json(meta, base.string() + ".meta.json");

    char line[128];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", l, res_f, res_s);
    summary += line;
  }
  std::ofstream f(fs::path(opt.out_dir) / "kfac_summary.csv");
  f << summary;
  std::cout << summary;
  return 0;
}

int run_mc_sweep(const CommonOptions& opt, const std::vector<std::size_t>& m_grid,
                 const std::vector<std::uint64_t>& seeds) {
  if (!std::is_sorted(m_grid.begin(), m_grid.end())) {
    throw std::runtime_error("mc-sweep: m-grid must be ascending");
  }
  const Network net = load_network_json(opt.net_path);
  const LossConfig cfg = loss_config(opt);
  const FlattenOrder order = flatten_order(opt);
  const Dataset data = resolve_dataset(opt, net, cfg.criterion);
  fs::create_directories(opt.out_dir);

  const Matrix ggn = ggn_full(net, data, cfg, order);
  std::string csv = "m,seed,spectral_residual,frobenius_residual\n";
  for (std::size_t m : m_grid) {
    for (std::uint64_t seed : seeds) {
      const Matrix mc = mc_fisher_full(net, data, cfg, order, m, seed);
      const double rs = relative_residual(mc, ggn, ResidualMetric::Spectral);
      const double rf = relative_residual(mc, ggn, ResidualMetric::Frobenius);
      char line[160];
      std::snprintf(line, sizeof(line), "%zu,%llu,%.17g,%.17g\n", m,
                    static_cast<unsigned long long>(seed), rs, rf);
      csv += line;
    }
  }
  std::ofstream f(fs::path(opt.out_dir) / "mc_sweep.csv");
  f << csv;
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature-matrix workbench: exact GGN/Fisher/Hessian and "
               "KFAC for small MLPs"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string kind = "ggn";
  int layer = -1;
  std::vector<std::size_t> m_grid = {10, 100, 1000};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--net", opt.net_path, "network spec JSON")->required();
    cmd->add_option("--data", opt.data_spec,
                    "dataset CSV path or synthetic:seed=S,n=N")
        ->required();
    cmd->add_option("--loss", opt.loss, "mse|ce");
    cmd->add_option("--reduction", opt.reduction, "sum|mean");
    cmd->add_option("--flatten", opt.flatten, "cvec|rvec");
    cmd->add_option("--mc-samples", opt.mc_samples, "MC sample count M");
    cmd->add_option("--seed", opt.seed, "base seed");
    cmd->add_option("--out", opt.out_dir, "output directory");
  };

  CLI::App* curvature = app.add_subcommand(
      "curvature", "exact curvature matrix (full or one layer block)");
  add_common(curvature);
  curvature->add_option("--kind", kind, "ggn|fisher-mc|fisher-emp|hessian-fd");
  curvature->add_option("--layer", layer, "layer index (default: full matrix)");

  CLI::App* kfac = app.add_subcommand(
      "kfac", "per-layer KFAC factors and residuals vs the exact block");
  add_common(kfac);
  kfac->add_option("--kind", kind, "ggn|fisher-mc|fisher-emp");

  CLI::App* sweep = app.add_subcommand(
      "mc-sweep", "MC Fisher residual to the GGN across sample counts");
  add_common(sweep);
  sweep->add_option("--m-grid", m_grid, "ascending MC sample counts");
  sweep->add_option("--seeds", seeds, "seeds for the sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    if (curvature->parsed()) return run_curvature(opt, kind, layer);
    if (kfac->parsed()) return run_kfac(opt, kind);
    if (sweep->parsed()) return run_mc_sweep(opt, m_grid, seeds);
  } catch (const NumericError& e) {
    std::cerr << "numeric contract violation: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return 0;
}
