#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "reacg/reacg.hpp"

namespace {

namespace fs = std::filesystem;
using namespace reacg;

AttackVariant parse_variant(const std::string& name) {
    static const std::map<std::string, AttackVariant> table = {
        {"apgd", AttackVariant::apgd},   {"acg", AttackVariant::acg},
        {"acg-r", AttackVariant::acg_r}, {"acg-t", AttackVariant::acg_t},
        {"reacg", AttackVariant::reacg},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown attack variant '" + name + "'");
    return it->second;
}

LossKind parse_loss(const std::string& name) {
    if (name == "cw") return LossKind::cw;
    if (name == "dlr") return LossKind::dlr;
    throw ConfigError("unknown loss '" + name + "'");
}

struct GenDataArgs {
    std::string out;
    int samples = 200;
    int classes = 3;
    int dim = 2;
    double spread = 0.08;
    std::uint64_t seed = 0;
};

void cmd_gen_data(const GenDataArgs& a) {
    const Dataset ds = make_blobs(a.samples, a.classes, a.dim, a.spread, a.seed);
    save_dataset(ds, a.out);
    std::cout << "wrote " << ds.size() << " samples (" << a.classes << " classes, dim " << a.dim
              << ") to " << a.out << "\n";
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::vector<std::size_t> hidden{16, 16};
    int epochs = 200;
    double lr = 0.05;
    std::uint64_t seed = 0;
};

void cmd_train(const TrainArgs& a) {
    const Dataset ds = load_dataset(a.data);
    int max_label = 0;
    for (int label : ds.labels) max_label = std::max(max_label, label);
    const std::size_t num_classes = static_cast<std::size_t>(max_label) + 1;
    if (num_classes < 2) throw ConfigError("train: dataset has fewer than 2 classes");
    ClassifierModel model = make_mlp(ds.dim(), a.hidden, num_classes, a.seed);
    TrainResult result = train_toy(std::move(model), ds, a.epochs, a.lr, derive_seed(a.seed, 1));
    save_model(result.model, a.out);
    std::cout << "trained model -> " << a.out << "\n"
              << "clean accuracy: " << 100.0 * result.clean_accuracy << "%\n";
}

struct AttackArgs {
    std::string model;
    std::string data;
    std::string out;
    std::vector<std::string> attacks{"reacg"};
    std::vector<std::string> losses{"cw"};
    std::string eps = "8/255";
    std::vector<int> iters{100};
    int restarts = 0;
    std::uint64_t seed = 0;
    bool early_stop = false;
    double eta0 = 0.0;
    std::vector<double> schedule;   // p1 q q_min
};

void cmd_attack(const AttackArgs& a) {
    ExperimentConfig cfg;
    cfg.model_path = a.model;
    cfg.data_path = a.data;
    cfg.out_dir = a.out;
    cfg.variants.clear();
    for (const auto& name : a.attacks) cfg.variants.push_back(parse_variant(name));
    cfg.losses.clear();
    for (const auto& name : a.losses) cfg.losses.push_back(parse_loss(name));
    cfg.epsilon = parse_epsilon(a.eps);
    cfg.iters_list = a.iters;
    cfg.restarts = a.restarts;
    cfg.seed = a.seed;
    cfg.early_stop = a.early_stop;
    if (a.eta0 > 0.0) cfg.eta0 = a.eta0;
    if (!a.schedule.empty()) {
        if (a.schedule.size() != 3)
            throw ConfigError("--schedule expects three values: p1 q q_min");
        cfg.schedule_override = ScheduleParams(a.schedule[0], a.schedule[1], a.schedule[2]);
    }

    const auto summaries = run_experiment(cfg);
    std::cout << std::fixed << std::setprecision(2);
    for (const auto& s : summaries)
        std::cout << variant_name(s.variant) << " / " << loss_name(s.loss) << " / N=" << s.iters
                  << ": clean " << s.clean_accuracy_pct << "%, robust " << s.robust_accuracy_pct
                  << "%, mean final loss " << std::setprecision(4) << s.mean_final_loss
                  << std::setprecision(2) << "\n";
    std::cout << "outputs in " << cfg.out_dir.string() << "\n";
}

struct TuneArgs {
    std::string model;
    std::string data;
    std::string out = "tuning_report.json";
    int budget = 100;
    std::uint64_t seed = 0;
    std::string eps = "8/255";
    int iters = 100;
};

void cmd_tune(const TuneArgs& a) {
    const ClassifierModel model = load_model(a.model);
    const Dataset ds = load_dataset(a.data);
    AttackConfig base = AttackConfig::for_variant(AttackVariant::reacg);
    base.loss = LossKind::cw;
    base.epsilon = parse_epsilon(a.eps);
    base.iters = a.iters;
    base.restarts = 0;
    base.seed = a.seed;

    const TuneResult result = tune(model, ds, a.budget, a.seed, base);
    {
        std::ofstream out(a.out);
        if (!out) throw ConfigError("cannot write " + a.out);
        out << tuning_report_json(result).dump(2) << "\n";
    }
    std::cout << std::fixed << std::setprecision(4) << "best schedule: p1=" << result.best.params.p1
              << " q=" << result.best.params.q << " q_min=" << result.best.params.q_min
              << std::setprecision(2) << " (robust " << result.best.robust_acc << "%, mean loss "
              << std::setprecision(4) << result.best.mean_cw_loss << ")\n"
              << "front size: " << result.front.size() << "\nreport: " << a.out << "\n";
}

struct ReportArgs {
    std::string run_dir;
};

void cmd_report(const ReportArgs& a) {
    std::vector<nlohmann::json> reports;
    for (const auto& entry : fs::directory_iterator(a.run_dir)) {
        if (!entry.is_directory()) continue;
        const fs::path report_path = entry.path() / "report.json";
        if (!fs::exists(report_path)) continue;
        std::ifstream in(report_path);
        nlohmann::json j;
        in >> j;
        reports.push_back(std::move(j));
    }
    if (reports.empty()) throw ConfigError("no report.json files under " + a.run_dir);
    std::sort(reports.begin(), reports.end(), [](const auto& x, const auto& y) {
        const auto key = [](const nlohmann::json& j) {
            return std::make_tuple(j.at("loss").template get<std::string>(),
                                   j.at("iters").template get<int>(),
                                   j.at("variant").template get<std::string>());
        };
        return key(x) < key(y);
    });

    const fs::path summary_path = fs::path(a.run_dir) / "summary.csv";
    std::ofstream csv(summary_path);
    if (!csv) throw ConfigError("cannot write " + summary_path.string());
    csv << "variant,loss,iters,clean_accuracy,robust_accuracy,mean_final_loss\n";

    std::cout << std::left << std::setw(8) << "variant" << std::setw(6) << "loss" << std::setw(7)
              << "N" << std::setw(10) << "clean%" << std::setw(10) << "robust%" << "mean_loss\n";
    std::cout << std::fixed << std::setprecision(2);
    for (const auto& j : reports) {
        const auto variant = j.at("variant").get<std::string>();
        const auto loss = j.at("loss").get<std::string>();
        const int iters = j.at("iters").get<int>();
        const double clean = j.at("clean_accuracy").get<double>();
        const double robust = j.at("robust_accuracy").get<double>();
        const double mean_loss = j.at("mean_final_loss").get<double>();
        csv << variant << ',' << loss << ',' << iters << ',' << fmt_double(clean) << ','
            << fmt_double(robust) << ',' << fmt_double(mean_loss) << "\n";
        std::cout << std::left << std::setw(8) << variant << std::setw(6) << loss << std::setw(7)
                  << iters << std::setw(10) << clean << std::setw(10) << robust
                  << std::setprecision(4) << mean_loss << std::setprecision(2) << "\n";
    }
    std::cout << "summary: " << summary_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"L-inf sign-based adversarial attacks (APGD / ACG family / ReACG)"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a Gaussian-blob dataset CSV");
    gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();
    gen_cmd->add_option("--samples", gen.samples, "Number of samples");
    gen_cmd->add_option("--classes", gen.classes, "Number of classes");
    gen_cmd->add_option("--dim", gen.dim, "Feature dimension");
    gen_cmd->add_option("--spread", gen.spread, "Blob standard deviation");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->callback([&] { cmd_gen_data(gen); });

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a toy MLP classifier");
    train_cmd->add_option("--data", train.data, "Dataset CSV")->required();
    train_cmd->add_option("--out", train.out, "Output model JSON path")->required();
    train_cmd->add_option("--hidden", train.hidden, "Hidden layer widths");
    train_cmd->add_option("--epochs", train.epochs, "Training epochs");
    train_cmd->add_option("--lr", train.lr, "Learning rate");
    train_cmd->add_option("--seed", train.seed, "RNG seed");
    train_cmd->callback([&] { cmd_train(train); });

    AttackArgs attack;
    auto* attack_cmd = app.add_subcommand("attack", "Run attacks over a dataset");
    attack_cmd->add_option("--model", attack.model, "Model JSON path")->required();
    attack_cmd->add_option("--data", attack.data, "Dataset CSV")->required();
    attack_cmd->add_option("--out", attack.out, "Output directory")->required();
    attack_cmd
        ->add_option("--attack", attack.attacks, "Attack variant(s)")
        ->check(CLI::IsMember({"apgd", "acg", "acg-r", "acg-t", "reacg"}));
    attack_cmd->add_option("--loss", attack.losses, "Loss function(s)")
        ->check(CLI::IsMember({"cw", "dlr"}));
    attack_cmd->add_option("--eps", attack.eps, "L-inf radius, decimal or a/b fraction");
    attack_cmd->add_option("--iters", attack.iters, "Iteration budget(s)");
    attack_cmd->add_option("--restarts", attack.restarts, "Uniform random restarts");
    attack_cmd->add_option("--seed", attack.seed, "RNG seed");
    attack_cmd->add_flag("--early-stop", attack.early_stop, "Stop at first misclassification");
    attack_cmd->add_option("--eta0", attack.eta0, "Initial step size (default 2*eps)");
    attack_cmd->add_option("--schedule", attack.schedule,
                           "Checkpoint parameter override: p1 q q_min")
        ->expected(3);
    attack_cmd->callback([&] { cmd_attack(attack); });

    TuneArgs tune_args;
    auto* tune_cmd = app.add_subcommand("tune", "Search checkpoint parameters (random search)");
    tune_cmd->add_option("--model", tune_args.model, "Model JSON path")->required();
    tune_cmd->add_option("--data", tune_args.data, "Tuning dataset CSV")->required();
    tune_cmd->add_option("--out", tune_args.out, "Tuning report JSON path");
    tune_cmd->add_option("--budget", tune_args.budget, "Number of trials");
    tune_cmd->add_option("--seed", tune_args.seed, "RNG seed");
    tune_cmd->add_option("--eps", tune_args.eps, "L-inf radius, decimal or a/b fraction");
    tune_cmd->add_option("--iters", tune_args.iters, "Iterations per attack");
    tune_cmd->callback([&] { cmd_tune(tune_args); });

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Summarize a run directory");
    report_cmd->add_option("--run", report.run_dir, "Run directory from 'attack'")->required();
    report_cmd->callback([&] { cmd_report(report); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
