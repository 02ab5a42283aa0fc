// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/experiment.hpp"
#include "slotllm/plot.hpp"

#include <sstream>

namespace slotllm::inline SLOTLLM_ABI {

namespace fs = std::filesystem;

namespace {

const char* kBaselineNames[] = {"text", "cascade", "speechllm"};

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    return r;
}

struct CurveRow {
    std::string stage;
    long step = 0;
    double train_loss = 0, eval_loss = 0, lr = 0;
};

std::vector<CurveRow> read_curve(const fs::path& p) {
    std::vector<CurveRow> rows;
    std::istringstream in(read_file(p));
    std::string line;
    std::getline(in, line);
    if (line != "stage,step,train_loss,eval_loss,lr") throw std::runtime_error(p.string() + ": unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 5) throw std::runtime_error(p.string() + ": malformed row '" + line + "'");
        rows.push_back({f[0], std::stol(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
    }
    return rows;
}

std::string expected_files(const std::vector<std::string>& strategies) {
    std::string s = "config.json";
    if (strategies.empty()) {
        s += ", strategies/<name>/{eval.json,curve.csv}";
    } else {
        for (const std::string& n : strategies) s += ", strategies/" + n + "/eval.json, strategies/" + n + "/curve.csv";
    }
    s += ", baselines/{text,cascade,speechllm}/eval.json";
    return s;
}

}  // namespace

json write_report(const fs::path& run) {
    std::vector<std::string> configured;
    std::string run_hash;
    if (fs::exists(run / "config.json")) {
        const json c = json::parse(read_file(run / "config.json"));
        run_hash = c.at("config_hash").get<std::string>();
        for (const json& s : c.at("config").at("strategies")) configured.push_back(s.at("name").get<std::string>());
    }

    // Artifact directories: configured strategies first, then any others found.
    std::vector<std::string> strategies = configured;
    if (fs::is_directory(run / "strategies")) {
        std::vector<std::string> found;
        for (const auto& e : fs::directory_iterator(run / "strategies")) {
            if (e.is_directory()) found.push_back(e.path().filename().string());
        }
        std::sort(found.begin(), found.end());
        for (const std::string& n : found) {
            if (std::find(strategies.begin(), strategies.end(), n) == strategies.end()) strategies.push_back(n);
        }
    }

    std::vector<std::string> missing;
    std::vector<std::pair<std::string, fs::path>> evals;
    std::vector<std::pair<std::string, fs::path>> curves;
    auto check_hash = [&](const fs::path& dir) {
        if (!fs::exists(dir / "config.json")) return;
        const std::string h = recorded_config_hash(dir);
        if (run_hash.empty()) run_hash = h;
        if (h != run_hash) {
            throw std::runtime_error("refusing to mix artifacts: " + dir.string() + " has config " + h.substr(0, 12) +
                                     " but the run has " + run_hash.substr(0, 12));
        }
    };
    for (const std::string& n : strategies) {
        const fs::path dir = run / "strategies" / n;
        check_hash(dir);
        if (fs::exists(dir / "eval.json")) evals.emplace_back(n, dir / "eval.json");
        else missing.push_back((dir / "eval.json").string());
        if (fs::exists(dir / "curve.csv")) curves.emplace_back(n, dir / "curve.csv");
        else missing.push_back((dir / "curve.csv").string());
    }
    for (const char* b : kBaselineNames) {
        const fs::path dir = run / "baselines" / b;
        if (!fs::is_directory(dir)) continue;
        check_hash(dir);
        if (fs::exists(dir / "eval.json")) evals.emplace_back(std::string("baseline:") + b, dir / "eval.json");
        else missing.push_back((dir / "eval.json").string());
    }
    if (evals.empty() && curves.empty()) {
        throw std::runtime_error("nothing to report in " + run.string() + "; expected " + expected_files(configured));
    }

    const fs::path out = run / "report";
    fs::create_directories(out);
    json report = {{"config_hash", run_hash}, {"rows", json::array()}, {"missing", missing}};
    std::vector<std::pair<std::string, EvalReport>> id_rows, ood_rows;
    std::string wer_lines;
    for (const auto& [name, path] : evals) {
        const json e = json::parse(read_file(path));
        const std::string label = e.value("kind", "") == "baseline" ? "baseline:" + e.at("system").get<std::string>()
                                                                     : e.at("system").get<std::string>();
        id_rows.emplace_back(label, report_from_json(e.at("id")));
        json row = {{"system", label}, {"id", e.at("id")}};
        if (e.contains("ood")) {
            ood_rows.emplace_back(label, report_from_json(e.at("ood")));
            row["ood"] = e.at("ood");
            row["ood_overlap_fraction"] = e.at("ood_overlap_fraction");
        }
        if (e.contains("asr_wer")) {
            row["asr_wer"] = e.at("asr_wer");
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s ASR WER: %.4f\n", label.c_str(), e.at("asr_wer").get<double>());
            wer_lines += buf;
        }
        report["rows"].push_back(std::move(row));
    }

    std::string tables;
    if (!id_rows.empty()) tables += "In-domain evaluation\n" + format_table(id_rows);
    if (!ood_rows.empty()) tables += "\nOut-of-domain evaluation\n" + format_table(ood_rows);
    if (!wer_lines.empty()) tables += "\n" + wer_lines;
    if (!missing.empty()) {
        tables += "\nMissing artifacts:\n";
        for (const std::string& m : missing) tables += "  " + m + "\n";
    }
    write_file_atomic(out / "tables.txt", tables);

    if (!curves.empty()) {
        std::string csv = "strategy,stage,step,train_loss,eval_loss,lr\n";
        std::vector<PlotSeries> series;
        for (const auto& [name, path] : curves) {
            const std::vector<CurveRow> rows = read_curve(path);
            char buf[256];
            for (const CurveRow& r : rows) {
                std::snprintf(buf, sizeof buf, "%s,%s,%ld,%.9g,%.9g,%.9g\n", name.c_str(), r.stage.c_str(), r.step,
                              r.train_loss, r.eval_loss, r.lr);
                csv += buf;
            }
            if (rows.empty()) continue;
            // Only the final stage shares the slot-filling eval objective.
            PlotSeries s;
            s.label = name;
            for (const CurveRow& r : rows) {
                if (r.stage != rows.back().stage) continue;
                s.x.push_back(static_cast<double>(r.step));
                s.y.push_back(r.eval_loss);
            }
            series.push_back(std::move(s));
        }
        write_file_atomic(out / "curves.csv", csv);
        if (!series.empty()) {
            PlotSpec spec;
            spec.title = "Slot-filling eval loss";
            spec.x_label = "global step";
            spec.y_label = "eval loss";
            spec.log_y = true;
            write_line_plot_png(out / "curves.png", series, spec);
            json labels = json::array();
            for (const PlotSeries& s : series) labels.push_back(s.label);
            report["overlay"] = {{"png", "curves.png"}, {"series", labels}};
        }
    }
    write_file_atomic(out / "report.json", report.dump(2) + "\n");
    return report;
}

}  // namespace slotllm
