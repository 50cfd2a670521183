#include "betanlft/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "betanlft/errors.hpp"
#include "betanlft/metrics.hpp"
#include "betanlft/numfmt.hpp"
#include "betanlft/objective.hpp"
#include "betanlft/pso.hpp"
#include "betanlft/synthetic.hpp"
#include "betanlft/trainer.hpp"

namespace betanlft {

namespace {

Dims parse_dims(const std::string& text) {
    std::array<std::size_t, 3> v{};
    std::size_t count = 0;
    std::string_view rest = text;
    while (true) {
        const auto comma = rest.find_first_of(",x");
        if (count == 3 || !parse_index(rest.substr(0, comma), v[count]) || v[count] == 0)
            throw std::invalid_argument("dims must look like 20,20,8");
        ++count;
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    if (count != 3) throw std::invalid_argument("dims must look like 20,20,8");
    return {v[0], v[1], v[2]};
}

std::pair<double, double> parse_range(const std::string& text) {
    const auto colon = text.find(':');
    double lo = 0.0, hi = 0.0;
    if (colon == std::string::npos || !parse_double(std::string_view(text).substr(0, colon), lo) ||
        !parse_double(std::string_view(text).substr(colon + 1), hi))
        throw std::invalid_argument("range must look like LO:HI, got " + text);
    return {lo, hi};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

// Settings shared by train and adapt.
struct FitOptions {
    std::string data;
    std::string dims;
    std::size_t rank = 4;
    double beta = 2.0;
    double lambda = 0.01;
    double lambda_b = 0.01;
    std::size_t max_iters = 500;
    double tol = 1e-6;
    std::size_t patience = 0;
    std::uint64_t seed = 1;
    std::string split = "7:1:2";
    std::string out = "model.json";
    std::string report = "report.csv";
    std::string test_out;
    bool reproducible = false;
    bool adaptive = false;
    // swarm
    std::size_t particles = 20;
    double omega = 0.726;
    double c1 = 2.0;
    double c2 = 2.0;
    std::string beta_bounds = "0:3";
    std::string lambda_bounds = "0.0001:0.1";
    std::string lambda_b_bounds = "0.0001:0.1";
    std::string trajectory;
    std::size_t threads = 1;
    std::size_t sweeps_per_round = 1;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
    cmd->add_option("--data", o.data, "observation CSV (i,j,k,y)")->required();
    cmd->add_option("--dims", o.dims, "explicit dims I,J,K (default: inferred)");
    cmd->add_option("--rank", o.rank, "CP rank R")->check(CLI::PositiveNumber);
    cmd->add_option("--beta", o.beta, "beta-divergence parameter");
    cmd->add_option("--lambda", o.lambda, "factor regularisation")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda-b", o.lambda_b, "bias regularisation")->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-iters", o.max_iters, "training iterations / swarm rounds")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", o.tol, "validation RMSE improvement that resets patience");
    cmd->add_option("--patience", o.patience, "early-stop patience (0 disables)");
    cmd->add_option("--seed", o.seed, "seed for split, init and swarm");
    cmd->add_option("--split", o.split, "train:validation:test ratios");
    cmd->add_option("--out", o.out, "model output path");
    cmd->add_option("--report", o.report, "per-iteration report CSV");
    cmd->add_option("--test-out", o.test_out, "write the test split as CSV");
    cmd->add_flag("--reproducible", o.reproducible, "single-threaded, elapsed_ms written as 0");
    cmd->add_option("--particles", o.particles, "swarm size Q")->check(CLI::PositiveNumber);
    cmd->add_option("--omega", o.omega, "inertia weight");
    cmd->add_option("--c1", o.c1, "personal acceleration");
    cmd->add_option("--c2", o.c2, "global acceleration");
    cmd->add_option("--beta-bounds", o.beta_bounds, "beta search range LO:HI");
    cmd->add_option("--lambda-bounds", o.lambda_bounds, "lambda search range LO:HI");
    cmd->add_option("--lambda-b-bounds", o.lambda_b_bounds, "lambda_b search range LO:HI");
    cmd->add_option("--trajectory", o.trajectory, "swarm trajectory CSV");
    cmd->add_option("--threads", o.threads, "particle evaluations in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--sweeps-per-round", o.sweeps_per_round, "training sweeps per particle per round")
        ->check(CLI::PositiveNumber);
}

int run_fit(const FitOptions& o, bool adaptive, std::ostream& out) {
    std::optional<Dims> dims;
    if (!o.dims.empty()) dims = parse_dims(o.dims);
    const auto tensor = load_observations(o.data, dims);
    if (tensor.empty()) throw DataError("no observations in " + o.data);
    const double beta_min = adaptive ? parse_range(o.beta_bounds).first : o.beta;
    if (beta_min <= kBetaBranchTolerance) {
        for (const auto& e : tensor.entries())
            if (e.y == 0.0)
                throw DataError(o.data + ": zero observation at (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                                "," + std::to_string(e.k) + ") is undefined for beta <= 0");
    }
    const auto data = split(tensor, parse_split_ratios(o.split), o.seed);

    TrainConfig tcfg;
    tcfg.hp = {o.beta, o.lambda, o.lambda_b};
    tcfg.max_iters = o.max_iters;
    tcfg.tol = o.tol;
    tcfg.patience = o.patience;
    tcfg.seed = o.seed;
    tcfg.reproducible = o.reproducible;

    FactorModel model;
    TrainReport report;
    if (adaptive) {
        SwarmConfig scfg;
        scfg.particles = o.particles;
        scfg.omega = o.omega;
        scfg.c1 = o.c1;
        scfg.c2 = o.c2;
        const auto [blo, bhi] = parse_range(o.beta_bounds);
        const auto [llo, lhi] = parse_range(o.lambda_bounds);
        const auto [lblo, lbhi] = parse_range(o.lambda_b_bounds);
        scfg.x_lo = {blo, llo, lblo};
        scfg.x_hi = {bhi, lhi, lbhi};
        scfg.max_rounds = o.max_iters;
        scfg.seed = o.seed;
        scfg.threads = o.reproducible ? 1 : o.threads;
        scfg.sweeps_per_round = o.sweeps_per_round;
        auto result = adapt_train(data, o.rank, scfg, tcfg);
        model = std::move(result.model);
        report = std::move(result.report);
        if (!o.trajectory.empty()) {
            std::ostringstream csv;
            write_trajectory_csv(csv, result.swarm.trajectory);
            write_text(o.trajectory, csv.str());
        }
        out << "adapted beta=" << format_double(result.hp.beta) << " lambda=" << format_double(result.hp.lambda)
            << " lambda_b=" << format_double(result.hp.lambda_b) << "\n";
    } else {
        auto result = train(init_random(tensor.dims(), o.rank, o.seed), data, tcfg);
        model = std::move(result.model);
        report = std::move(result.report);
    }

    save_model_file(o.out, model);
    if (!o.report.empty()) {
        std::ostringstream csv;
        write_report_csv(csv, report);
        write_text(o.report, csv.str());
    }
    if (!o.test_out.empty()) save_observations(o.test_out, data.test);

    out << "stop=" << stop_reason_name(report.stop) << " iterations=" << report.records.size()
        << " best_iteration=" << report.best_iteration << " val_rmse=" << format_double(report.best_val_rmse)
        << "\n";
    if (!data.test.empty()) {
        const auto ev = evaluate(model, data.test);
        out << "test count=" << ev.count << " mae=" << format_double(ev.mae) << " rmse=" << format_double(ev.rmse)
            << "\n";
    }
    return kExitOk;
}

// Turns `--config file.json` into leading command-line tokens for every key
// that is not also given on the command line, so explicit flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> result;
    std::string config_path;
    std::vector<std::string> rest;
    for (std::size_t n = 0; n < args.size(); ++n) {
        if (args[n] == "--config" && n + 1 < args.size()) {
            config_path = args[++n];
        } else if (args[n].rfind("--config=", 0) == 0) {
            config_path = args[n].substr(9);
        } else {
            rest.push_back(args[n]);
        }
    }
    if (config_path.empty()) return rest;

    std::ifstream in(config_path);
    if (!in) throw DataError("cannot open config " + config_path);
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("config " + config_path + ": " + e.what());
    }
    if (!cfg.is_object()) throw DataError("config must be a JSON object");

    const auto given = [&](const std::string& flag) {
        return std::any_of(rest.begin(), rest.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };

    // Subcommand stays first.
    auto it = rest.begin();
    if (it != rest.end() && it->rfind("-", 0) != 0) result.push_back(*it++);
    for (const auto& [key, value] : cfg.items()) {
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        const std::string flag = "--" + name;
        if (given(flag)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) result.push_back(flag);
        } else if (value.is_string()) {
            result.push_back(flag);
            result.push_back(value.get<std::string>());
        } else if (value.is_number_integer()) {
            result.push_back(flag);
            result.push_back(std::to_string(value.get<long long>()));
        } else if (value.is_number()) {
            result.push_back(flag);
            result.push_back(format_double(value.get<double>()));
        } else {
            throw DataError("config key " + key + " must be a string, number or boolean");
        }
    }
    result.insert(result.end(), it, rest.end());
    return result;
}

}  // namespace

int cli_run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"betanlft: beta-divergence nonnegative latent factorization of QoS tensors"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    app.add_option("--config", "JSON config mirroring the flags; explicit flags win");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a planted-factor tensor");
    std::string synth_dims = "20,20,8";
    SyntheticSpec synth;
    std::string synth_out, synth_model;
    synth_cmd->add_option("--dims", synth_dims, "I,J,K");
    synth_cmd->add_option("--rank", synth.rank, "planted rank")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--density", synth.density, "observed fraction in (0,1]");
    synth_cmd->add_option("--noise", synth.noise_sigma, "gaussian noise sigma");
    synth_cmd->add_option("--seed", synth.seed);
    synth_cmd->add_option("--out", synth_out, "observation CSV")->required();
    synth_cmd->add_option("--model", synth_model, "also write the planted model");

    // split
    auto* split_cmd = app.add_subcommand("split", "seeded train/validation/test split");
    std::string split_data, split_ratio = "7:1:2", split_prefix;
    std::uint64_t split_seed = 1;
    split_cmd->add_option("--data", split_data)->required();
    split_cmd->add_option("--split", split_ratio);
    split_cmd->add_option("--seed", split_seed);
    split_cmd->add_option("--out", split_prefix, "prefix for .train/.val/.test CSV and .manifest.json")->required();

    // train / adapt
    FitOptions train_opts, adapt_opts;
    auto* train_cmd = app.add_subcommand("train", "train with fixed hyper-parameters");
    add_fit_options(train_cmd, train_opts);
    train_cmd->add_flag("--adaptive", train_opts.adaptive, "self-adapt hyper-parameters (same as adapt)");
    auto* adapt_cmd = app.add_subcommand("adapt", "train with particle-swarm hyper-parameter adaptation");
    add_fit_options(adapt_cmd, adapt_opts);
    adapt_cmd->add_flag("--adaptive", adapt_opts.adaptive, "no-op; adapt always adapts");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "predict values for index triples");
    std::string predict_model, predict_data, predict_out;
    predict_cmd->add_option("--model", predict_model)->required();
    predict_cmd->add_option("--data", predict_data, "CSV of i,j,k or i,j,k,y")->required();
    predict_cmd->add_option("--out", predict_out, "CSV i,j,k,yhat (default stdout)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "MAE and RMSE of a model on a set");
    std::string eval_model, eval_data;
    eval_cmd->add_option("--model", eval_model)->required();
    eval_cmd->add_option("--data", eval_data)->required();

    try {
        auto args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        if (*synth_cmd) {
            synth.dims = parse_dims(synth_dims);
            const auto planted = generate_synthetic(synth);
            save_observations(synth_out, planted.tensor);
            if (!synth_model.empty()) save_model_file(synth_model, planted.truth);
            out << "wrote " << planted.tensor.size() << " observations to " << synth_out << "\n";
        } else if (*split_cmd) {
            const auto tensor = load_observations(split_data);
            const auto ratios = parse_split_ratios(split_ratio);
            const auto parts = split(tensor, ratios, split_seed);
            save_observations(split_prefix + ".train.csv", parts.train);
            save_observations(split_prefix + ".val.csv", parts.validation);
            save_observations(split_prefix + ".test.csv", parts.test);
            write_text(split_prefix + ".manifest.json", split_manifest_json(parts, ratios));
            out << "train=" << parts.train.size() << " validation=" << parts.validation.size()
                << " test=" << parts.test.size() << "\n";
        } else if (*train_cmd) {
            return run_fit(train_opts, train_opts.adaptive, out);
        } else if (*adapt_cmd) {
            return run_fit(adapt_opts, true, out);
        } else if (*predict_cmd) {
            const auto model = load_model_file(predict_model);
            // Prediction inputs may carry a y column or not.
            std::ifstream in(predict_data);
            if (!in) throw DataError("cannot open " + predict_data);
            std::ostringstream csv;
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                const auto first = line.find_first_not_of(" \t\r");
                if (first == std::string::npos || line[first] == '#') continue;
                std::array<std::size_t, 3> idx{};
                std::string_view rest = line;
                for (std::size_t f = 0; f < 3; ++f) {
                    const auto comma = rest.find(',');
                    if (!parse_index(rest.substr(0, comma), idx[f]) || (f < 2 && comma == std::string_view::npos))
                        throw DataError(predict_data + ":" + std::to_string(line_no) + ": expected i,j,k[,y]");
                    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
                }
                double yhat = 0.0;
                try {
                    yhat = predict(model, idx[0], idx[1], idx[2]);
                } catch (const std::out_of_range&) {
                    throw DataError(predict_data + ":" + std::to_string(line_no) + ": index outside model dims");
                }
                csv << idx[0] << ',' << idx[1] << ',' << idx[2] << ',' << format_double(yhat) << '\n';
            }
            if (predict_out.empty()) {
                out << csv.str();
            } else {
                write_text(predict_out, csv.str());
            }
        } else if (*eval_cmd) {
            const auto model = load_model_file(eval_model);
            const auto set = load_observations(eval_data, model.dims());
            if (set.empty()) throw DataError("no observations in " + eval_data);
            const auto ev = evaluate(model, set);
            out << "count=" << ev.count << " mae=" << format_double(ev.mae) << " rmse=" << format_double(ev.rmse)
                << "\n";
        }
    } catch (const DivergenceError& e) {
        err << "numerical divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::domain_error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}

}  // namespace betanlft
