#include "fsum/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace fsum {

namespace {

using nlohmann::json;

double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) {
        return counts;
    }
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        std::string key;
        for (int j = 0; j < n; ++j) {
            if (j > 0) key.push_back('\x1f');
            key += tokens[i + static_cast<std::size_t>(j)];
        }
        ++counts[key];
    }
    return counts;
}

std::unordered_set<std::string> entity_set(std::string_view text, const Gazetteer& gaz) {
    std::unordered_set<std::string> set;
    for (const auto& mention : extract_entities(text, gaz).mentions) {
        set.insert(mention.normalized());
    }
    return set;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
    if (n != 1 && n != 2) {
        throw std::invalid_argument("rouge_n: n must be 1 or 2");
    }
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::int64_t cand_total = 0;
    for (const auto& kv : cand) cand_total += kv.second;
    std::int64_t ref_total = 0;
    for (const auto& kv : ref) ref_total += kv.second;

    if (cand_total == 0 && ref_total == 0) {
        return RougeScore{1.0, 1.0, 1.0};
    }
    std::int64_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) {
            overlap += std::min(count, it->second);
        }
    }
    RougeScore score;
    score.precision = cand_total > 0 ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
    score.recall = ref_total > 0 ? static_cast<double>(overlap) / static_cast<double>(ref_total) : 0.0;
    score.f1 = harmonic(score.precision, score.recall);
    return score;
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
    const std::size_t nc = candidate.size();
    const std::size_t nr = reference.size();
    if (nc == 0 && nr == 0) {
        return RougeScore{1.0, 1.0, 1.0};
    }
    if (nc == 0 || nr == 0) {
        return RougeScore{0.0, 0.0, 0.0};
    }
    // One-row LCS dynamic program.
    std::vector<int> prev(nr + 1, 0), curr(nr + 1, 0);
    for (std::size_t i = 1; i <= nc; ++i) {
        for (std::size_t j = 1; j <= nr; ++j) {
            if (candidate[i - 1] == reference[j - 1]) {
                curr[j] = prev[j - 1] + 1;
            } else {
                curr[j] = std::max(prev[j], curr[j - 1]);
            }
        }
        std::swap(prev, curr);
    }
    const double lcs = static_cast<double>(prev[nr]);
    RougeScore score;
    score.precision = lcs / static_cast<double>(nc);
    score.recall = lcs / static_cast<double>(nr);
    score.f1 = harmonic(score.precision, score.recall);
    return score;
}

FactualAccuracy entity_factual_accuracy(std::string_view cand_text, std::string_view ref_text,
                                        const Gazetteer& gaz) {
    const auto cand = entity_set(cand_text, gaz);
    const auto ref = entity_set(ref_text, gaz);
    if (cand.empty() && ref.empty()) {
        return FactualAccuracy{1.0, 1.0, 1.0};
    }
    std::size_t overlap = 0;
    for (const auto& surface : cand) {
        if (ref.count(surface)) ++overlap;
    }
    FactualAccuracy fa;
    fa.precision_target =
        cand.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(cand.size());
    fa.recall_target =
        ref.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(ref.size());
    fa.f1_target = harmonic(fa.precision_target, fa.recall_target);
    return fa;
}

EvalRow mean_row(const std::vector<EvalRow>& rows) {
    EvalRow mean;
    mean.record_id = "MEAN";
    if (rows.empty()) {
        return mean;
    }
    for (const EvalRow& r : rows) {
        mean.r1.precision += r.r1.precision;
        mean.r1.recall += r.r1.recall;
        mean.r1.f1 += r.r1.f1;
        mean.r2.precision += r.r2.precision;
        mean.r2.recall += r.r2.recall;
        mean.r2.f1 += r.r2.f1;
        mean.rl.precision += r.rl.precision;
        mean.rl.recall += r.rl.recall;
        mean.rl.f1 += r.rl.f1;
        mean.fa.precision_target += r.fa.precision_target;
        mean.fa.recall_target += r.fa.recall_target;
        mean.fa.f1_target += r.fa.f1_target;
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double* v : {&mean.r1.precision, &mean.r1.recall, &mean.r1.f1, &mean.r2.precision,
                      &mean.r2.recall, &mean.r2.f1, &mean.rl.precision, &mean.rl.recall,
                      &mean.rl.f1, &mean.fa.precision_target, &mean.fa.recall_target,
                      &mean.fa.f1_target}) {
        *v *= inv;
    }
    return mean;
}

TokenIds encode_source_text(std::string_view text, const Vocab& vocab, int max_len) {
    TokenIds ids = vocab.encode(text, false);
    if (static_cast<int>(ids.size()) > max_len) {
        ids.resize(static_cast<std::size_t>(max_len));
    }
    if (ids.empty()) {
        ids.push_back(Vocab::unk_id);
    }
    return ids;
}

EvalReport evaluate_corpus(const Checkpoint& ckpt, const std::vector<ClinicalRecord>& test_records,
                           const Gazetteer& gaz, const Vocab& vocab) {
    if (vocab.content_hash() != ckpt.vocab_hash) {
        throw std::runtime_error("evaluate_corpus: vocabulary hash does not match the checkpoint");
    }
    EvalReport report;
    report.rows.reserve(test_records.size());
    for (const ClinicalRecord& rec : test_records) {
        const TokenIds src = encode_source_text(rec.findings, vocab, ckpt.model_cfg.max_src_len);
        const TokenIds decoded = greedy_decode(ckpt.params, src, ckpt.model_cfg.max_tgt_len - 1);
        const std::vector<std::string> cand_tokens = vocab.decode(decoded);
        const std::vector<std::string> ref_tokens = tokenize(rec.impression);

        EvalRow row;
        row.record_id = rec.record_id;
        row.r1 = rouge_n(cand_tokens, ref_tokens, 1);
        row.r2 = rouge_n(cand_tokens, ref_tokens, 2);
        row.rl = rouge_l(cand_tokens, ref_tokens);

        std::string cand_text;
        for (std::size_t i = 0; i < cand_tokens.size(); ++i) {
            if (i > 0) cand_text.push_back(' ');
            cand_text += cand_tokens[i];
        }
        row.fa = entity_factual_accuracy(cand_text, rec.impression, gaz);
        report.rows.push_back(std::move(row));
    }
    report.mean = mean_row(report.rows);
    return report;
}

namespace {

void append_row_csv(std::ofstream& out, const EvalRow& r) {
    out << r.record_id << ',' << format_metric(r.r1.precision) << ',' << format_metric(r.r1.recall)
        << ',' << format_metric(r.r1.f1) << ',' << format_metric(r.r2.precision) << ','
        << format_metric(r.r2.recall) << ',' << format_metric(r.r2.f1) << ','
        << format_metric(r.rl.precision) << ',' << format_metric(r.rl.recall) << ','
        << format_metric(r.rl.f1) << ',' << format_metric(r.fa.precision_target) << ','
        << format_metric(r.fa.recall_target) << ',' << format_metric(r.fa.f1_target) << '\n';
}

json row_to_json(const EvalRow& r) {
    return json{{"record_id", r.record_id},
                {"r1_p", r.r1.precision},
                {"r1_r", r.r1.recall},
                {"r1_f", r.r1.f1},
                {"r2_p", r.r2.precision},
                {"r2_r", r.r2.recall},
                {"r2_f", r.r2.f1},
                {"rl_p", r.rl.precision},
                {"rl_r", r.rl.recall},
                {"rl_f", r.rl.f1},
                {"precision_target", r.fa.precision_target},
                {"recall_target", r.fa.recall_target},
                {"f1_target", r.fa.f1_target}};
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("eval report: cannot write " + path);
    }
    out << "record_id,r1_p,r1_r,r1_f,r2_p,r2_r,r2_f,rl_p,rl_r,rl_f,"
           "precision_target,recall_target,f1_target\n";
    for (const EvalRow& r : report.rows) {
        append_row_csv(out, r);
    }
    append_row_csv(out, report.mean);
}

void write_report_json(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("eval report: cannot write " + path);
    }
    json doc;
    doc["rows"] = json::array();
    for (const EvalRow& r : report.rows) {
        doc["rows"].push_back(row_to_json(r));
    }
    doc["mean"] = row_to_json(report.mean);
    out << doc.dump(2) << "\n";
}

}  // namespace fsum
