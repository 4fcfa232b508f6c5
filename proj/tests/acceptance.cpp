// Acceptance runner: one PASS/FAIL/SKIP line per criterion, non-zero exit on any failure.
//
//   acceptance [--workdir DIR] [--only 1,2,...] [--with-mnist]
//
// Criterion 8 needs the MNIST IDX files in $LRAD_MNIST_DIR and --with-mnist.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "auc_oracle.hpp"
#include "gradcheck_cases.hpp"
#include "lrad/cli.hpp"
#include "svd_checks.hpp"

using namespace lrad;
using namespace lrad::test;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    enum Status { pass, fail, skip } status;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// ---- 1: gradients ------------------------------------------------------------

Outcome gradients() {
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    bool ok = true;
    std::ostringstream worst;
    for (const auto& family : op_families()) {
        double max_err = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const auto c = family.make(rng);
            max_err = std::max(max_err, grad_check(c.op, c.inputs).max_rel_error);
        }
        if (max_err > family.tolerance) {
            ok = false;
            worst << " " << family.name << "=" << fmt(max_err) << ">" << fmt(family.tolerance);
        }
        std::cerr << "  grad " << family.name << ": max rel error " << fmt(max_err) << " (limit "
                  << fmt(family.tolerance) << ")\n";
    }
    const double t = seconds_since(start);
    ok = ok && t < 60.0;
    return {ok ? Outcome::pass : Outcome::fail,
            std::to_string(op_families().size()) + " ops x 20 shapes in " + fmt(t, 3) + "s" + worst.str()};
}

// ---- 2: SVD ------------------------------------------------------------------

Outcome svd_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(31337);
    double rec = 0, orth = 0;
    bool order = true;
    for (int i = 0; i < 500; ++i) {
        const auto a = svd_test_matrix(rng, pick(rng, 1, 32), pick(rng, 1, 32));
        const auto q = assess(a, svd(a));
        rec = std::max(rec, q.reconstruction);
        orth = std::max(orth, q.orthonormality);
        order = order && q.descending && q.non_negative;
    }
    const double t = seconds_since(start);
    const bool ok = rec <= 1e-10 && orth <= 1e-10 && order && t < 60.0;
    return {ok ? Outcome::pass : Outcome::fail, "500 matrices: max rel reconstruction " + fmt(rec) +
                                                    ", orthonormality defect " + fmt(orth) +
                                                    (order ? ", descending" : ", ORDER VIOLATED") + ", " + fmt(t, 3) +
                                                    "s"};
}

// ---- 3: AUC ------------------------------------------------------------------

Outcome auc_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(99);
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
        const auto s = random_score_set(rng);
        worst = std::max(worst, std::abs(auc(s.scores, s.anomaly) - auc_all_pairs(s.scores, s.anomaly)));
    }
    const double t = seconds_since(start);
    const bool ok = worst <= 1e-12 && t < 10.0;
    return {ok ? Outcome::pass : Outcome::fail,
            "200 score sets: max |rank AUC - pairwise AUC| " + fmt(worst) + ", " + fmt(t, 3) + "s"};
}

// ---- shared synthetic setup ----------------------------------------------------

// 2200 normals + 200 anomalies; 2000 normals train, 200 + 200 test.
cli::RunConfig synthetic_config(const std::filesystem::path& out) {
    cli::RunConfig c;
    c.data.kind = "synth";
    c.held_class = 1;
    c.polarity = Polarity::class_is_anomaly;
    c.train_fraction = 2000.0 / 2200.0;
    c.network.base_width = 32;
    c.train.epochs = 20;
    c.train.batch_size = 64;
    c.out = out;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- 4: determinism ---------------------------------------------------------------

Outcome determinism(const std::filesystem::path& work) {
    const auto start = Clock::now();
    std::string history, scores;
    bool same = true;
    for (int run = 0; run < 3; ++run) {
        auto c = synthetic_config(work / ("determinism-" + std::to_string(run)));
        c.train.epochs = 2;
        c.deterministic = true;
        c.command = "train";
        cli::validate(c);
        std::ostringstream sink;
        if (cli::run(c, sink) != cli::kOk) return {Outcome::fail, "training run " + std::to_string(run) + " failed"};
        c.command = "eval";
        c.checkpoint = (c.out / "model.lrad").string();
        if (cli::run(c, sink) != cli::kOk) return {Outcome::fail, "eval run " + std::to_string(run) + " failed"};
        const auto h = slurp(c.out / "history.csv"), s = slurp(c.out / "scores.csv");
        if (run == 0) {
            history = h;
            scores = s;
        } else {
            same = same && h == history && s == scores;
        }
    }
    const double t = seconds_since(start);
    const bool ok = same && !history.empty() && !scores.empty() && t < 300.0;
    return {ok ? Outcome::pass : Outcome::fail, std::string("3 runs of 2 epochs: history.csv and scores.csv ") +
                                                    (same ? "bitwise identical" : "DIFFER") + ", " + fmt(t, 3) + "s"};
}

// ---- 5-7: detection quality ------------------------------------------------------

struct QualityRun {
    double latent_auc = 0, pixel_auc = 0, full_seconds = 0, ablation_seconds = 0;
    std::vector<AblationRow> ablation;
    std::string error;
};

QualityRun quality_runs(const std::filesystem::path& work, bool with_ablation) {
    QualityRun q;
    auto c = synthetic_config(work / "quality");
    c.command = "eval";
    cli::validate(c);
    const auto data = cli::load_dataset(c);
    const auto split = one_class_split(data, c.held_class, c.polarity, c.train_fraction, c.train.seed);
    if (split.train_normals.size() != 2000 || split.test.size() != 400) {
        q.error = "unexpected split sizes";
        return q;
    }
    try {
        auto start = Clock::now();
        auto state = build_networks<float>(c.network, c.train.seed);
        train(state, c.train, split.train_normals, [](std::size_t e, const LossBreakdown& b) {
            std::cerr << "  [full] epoch " << e + 1 << " " << detail::describe(b) << "\n";
        });
        const auto records = score_dataset(state, split.test, split.test_anomaly_flags);
        q.full_seconds = seconds_since(start);
        q.latent_auc = auc(records, ScoreKind::latent);
        q.pixel_auc = auc(records, ScoreKind::pixel);
        write_scores_csv(records, c.out / "scores.csv");
        q.ablation.push_back({Variant::full, ScoreKind::latent, q.latent_auc});
        if (with_ablation) {
            start = Clock::now();
            auto rows = run_ablation<float>(c.network, c.train, split,
                                            {Variant::irec_adv, Variant::irec_adv_rank, Variant::irec_adv_zrec},
                                            [](Variant v, std::size_t e, const LossBreakdown& b) {
                                                std::cerr << "  [" << name(v) << "] epoch " << e + 1 << " "
                                                          << detail::describe(b) << "\n";
                                            });
            q.ablation_seconds = seconds_since(start) + q.full_seconds;
            q.ablation.insert(q.ablation.begin(), rows.begin(), rows.end());
            write_ablation_csv(q.ablation, c.out / "ablation.csv");
        }
    } catch (const Error& e) {
        q.error = e.what();
    }
    return q;
}

// ---- 8: MNIST ----------------------------------------------------------------------

Outcome mnist(const std::filesystem::path& work, bool enabled) {
    const char* dir = std::getenv("LRAD_MNIST_DIR");
    if (!enabled || !dir)
        return {Outcome::skip, "optional; needs MNIST IDX files in $LRAD_MNIST_DIR and --with-mnist"};
    const std::filesystem::path root(dir);
    cli::RunConfig c;
    c.command = "eval";
    c.data.kind = "mnist";
    c.data.images = (root / "train-images-idx3-ubyte").string();
    c.data.labels = (root / "train-labels-idx1-ubyte").string();
    c.held_class = 0;
    c.polarity = Polarity::class_is_anomaly;
    c.train.epochs = 30;
    c.out = work / "mnist";
    try {
        cli::validate(c);
        const auto data = cli::load_dataset(c);
        const auto split = one_class_split(data, c.held_class, c.polarity, c.train_fraction, c.train.seed);
        const auto start = Clock::now();
        auto state = build_networks<float>(c.network, c.train.seed);
        train(state, c.train, split.train_normals);
        const double a = auc(score_dataset(state, split.test, split.test_anomaly_flags), ScoreKind::latent);
        const double t = seconds_since(start);
        return {a >= 0.90 && t <= 7200 ? Outcome::pass : Outcome::fail,
                "digit 0 as anomaly, 30 epochs: latent AUC " + fmt(a) + " (>= 0.90), " + fmt(t / 60, 3) + " min"};
    } catch (const Error& e) {
        return {Outcome::fail, e.what()};
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria runner"};
    std::string workdir = (std::filesystem::temp_directory_path() / "lrad-acceptance").string();
    std::vector<int> only;
    bool with_mnist = false;
    app.add_option("--workdir", workdir, "scratch directory for training runs");
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_flag("--with-mnist", with_mnist, "run the optional MNIST criterion");
    CLI11_PARSE(app, argc, argv);

    const std::filesystem::path work(workdir);
    std::filesystem::create_directories(work);
    set_worker_threads(1);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int k) { return selected.empty() || selected.contains(k); };

    int failures = 0;
    auto report = [&](int k, const char* title, const Outcome& o) {
        const char* tag = o.status == Outcome::pass ? "PASS" : o.status == Outcome::fail ? "FAIL" : "SKIP";
        std::cout << "criterion " << k << " [" << tag << "] " << title << ": " << o.detail << std::endl;
        failures += o.status == Outcome::fail;
    };

    if (wanted(1)) report(1, "gradient correctness", gradients());
    if (wanted(2)) report(2, "SVD oracle", svd_oracle());
    if (wanted(3)) report(3, "AUC oracle equivalence", auc_oracle());
    if (wanted(4)) report(4, "determinism", determinism(work));

    if (wanted(5) || wanted(6) || wanted(7)) {
        const auto q = quality_runs(work, wanted(6));
        if (!q.error.empty()) {
            for (int k : {5, 6, 7})
                if (wanted(k)) report(k, "synthetic detection", {Outcome::fail, "training failed: " + q.error});
        } else {
            if (wanted(5))
                report(5, "desk-scale detection",
                       {q.latent_auc >= 0.95 && q.full_seconds <= 900 ? Outcome::pass : Outcome::fail,
                        "latent AUC " + fmt(q.latent_auc) + " (>= 0.95), 20 epochs in " + fmt(q.full_seconds / 60, 3) +
                            " min (<= 15)"});
            if (wanted(6)) {
                double base = 0;
                std::ostringstream table;
                for (const auto& r : q.ablation) {
                    if (r.variant == Variant::irec_adv) base = r.auc;
                    table << " " << name(r.variant) << "=" << fmt(r.auc) << "(" << name(r.score) << ")";
                }
                report(6, "ablation direction",
                       {q.latent_auc >= base + 0.05 && q.ablation_seconds <= 2700 ? Outcome::pass : Outcome::fail,
                        "AUC full " + fmt(q.latent_auc) + " vs irec+adv " + fmt(base) + " (margin >= 0.05);" +
                            table.str() + "; 4 trainings in " + fmt(q.ablation_seconds / 60, 3) + " min (<= 45)"});
            }
            if (wanted(7))
                report(7, "latent vs pixel score",
                       {q.latent_auc >= q.pixel_auc ? Outcome::pass : Outcome::fail,
                        "latent AUC " + fmt(q.latent_auc) + " vs pixel AUC " + fmt(q.pixel_auc)});
        }
    }
    if (wanted(8)) report(8, "MNIST smoke", mnist(work, with_mnist));
    return failures == 0 ? 0 : 1;
}
