#include "fsum/synth.hpp"

#include <array>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "fsum/util.hpp"

namespace fsum {

namespace {

// Name grammar pools. Filler sentences below deliberately avoid producing
// any adjective+noun adjacency from these pools, so synthetic filler text
// never matches a gazetteer key.
const std::array<const char*, 30> kAdjectives = {
    "acute",      "chronic",   "mild",        "moderate",  "severe",       "bilateral",
    "focal",      "diffuse",   "residual",    "persistent", "recurrent",   "compensated",
    "ischemic",   "valvular",  "interstitial", "nodular",   "apical",      "basilar",
    "septal",     "pericardial", "pleural",   "vascular",  "pulmonary",   "cardiac",
    "hepatic",    "renal",     "atrial",      "ventricular", "aortic",     "mitral"};

const std::array<const char*, 30> kNouns = {
    "effusion",     "cardiomegaly", "edema",        "consolidation", "atelectasis",
    "pneumothorax", "opacity",      "congestion",   "fibrosis",      "stenosis",
    "regurgitation", "hypertrophy", "infiltrate",   "granuloma",     "scarring",
    "thickening",   "calcification", "dilatation",  "hypokinesis",   "dyskinesis",
    "insufficiency", "embolism",    "infarction",   "tamponade",     "aneurysm",
    "thrombus",     "ischemia",     "hypoperfusion", "obstruction",  "malposition"};

const std::array<const char*, 4> kSynonymSuffixes = {"disorder", "pattern", "process", "state"};

const std::array<const char*, 4> kSemanticTypes = {"finding", "disorder", "procedure", "anatomy"};

const std::array<const char*, 8> kOrgans = {"heart",  "lung",   "mediastinum", "pericardium",
                                            "aorta",  "atrium", "ventricle",   "diaphragm"};

const std::array<const char*, 8> kDefinitionQualifiers = {
    "reduced compliance",   "elevated pressure", "impaired filling",   "abnormal wall motion",
    "restricted blood flow", "volume overload",  "tissue remodeling",  "conduction delay"};

// One entity slot each; the word immediately before the slot is never a
// pool adjective.
const std::array<const char*, 4> kEntityTemplates = {
    "the current study demonstrates %E% .", "there is evidence of %E% on this exam .",
    "imaging shows %E% without interval change .", "again seen is %E% as on the prior exam ."};

const std::array<const char*, 5> kFillerSentences = {
    "no acute abnormality is identified .", "the remaining structures appear normal .",
    "there is no focal airspace disease .", "visualized osseous structures are intact .",
    "the exam is otherwise unremarkable ."};

const std::array<const char*, 4> kProcedureTypes = {"chest radiograph", "ct chest",
                                                    "echocardiogram", "mri cardiac"};

std::string fill_template(const char* tmpl, const std::string& entity) {
    std::string s(tmpl);
    const std::string marker = "%E%";
    const auto pos = s.find(marker);
    s.replace(pos, marker.size(), entity);
    return s;
}

}  // namespace

std::vector<FactRecord> generate_synthetic_kb(int n_concepts, std::uint64_t seed) {
    if (n_concepts < 1) {
        throw std::invalid_argument("generate_synthetic_kb: n_concepts must be >= 1");
    }
    const int two_word = static_cast<int>(kAdjectives.size() * kNouns.size());
    const int capacity = two_word + two_word * static_cast<int>(kAdjectives.size());
    if (n_concepts > capacity) {
        throw std::invalid_argument("generate_synthetic_kb: at most " + std::to_string(capacity) +
                                    " distinct concepts available");
    }

    std::mt19937_64 rng(seed);
    std::vector<FactRecord> kb;
    kb.reserve(static_cast<std::size_t>(n_concepts));
    for (int i = 0; i < n_concepts; ++i) {
        FactRecord fact;
        char id_buf[16];
        std::snprintf(id_buf, sizeof(id_buf), "C%05d", i + 1);
        fact.concept_id = id_buf;

        const int na = static_cast<int>(kAdjectives.size());
        const int nn = static_cast<int>(kNouns.size());
        std::string noun;
        if (i < two_word) {
            noun = kNouns[static_cast<std::size_t>(i / na)];
            fact.preferred_name = std::string(kAdjectives[static_cast<std::size_t>(i % na)]) + " " + noun;
        } else {
            const int j = i - two_word;
            noun = kNouns[static_cast<std::size_t>((j / (na * na)) % nn)];
            fact.preferred_name = std::string(kAdjectives[static_cast<std::size_t>(j % na)]) + " " +
                                  kAdjectives[static_cast<std::size_t>((j / na) % na)] + " " + noun;
        }

        if (i % 3 == 0) {
            fact.synonyms.push_back(fact.preferred_name + " " +
                                    kSynonymSuffixes[static_cast<std::size_t>(i / 3 % 4)]);
        }
        fact.semantic_type = kSemanticTypes[static_cast<std::size_t>(i % 4)];

        const auto organ = kOrgans[uniform_below(rng, kOrgans.size())];
        const auto qualifier = kDefinitionQualifiers[uniform_below(rng, kDefinitionQualifiers.size())];
        fact.definition = "a condition of the " + std::string(organ) + " characterized by " + noun +
                          " with " + std::string(qualifier);
        fact.source = (i % 3 == 0) ? "UMLS" : (i % 3 == 1 ? "SNOMED-CT" : "ICD-10");
        kb.push_back(std::move(fact));
    }
    return kb;
}

std::vector<ClinicalRecord> generate_synthetic_corpus(int n_records,
                                                      const std::vector<FactRecord>& kb,
                                                      double entity_density, std::uint64_t seed) {
    if (kb.empty()) {
        throw std::invalid_argument("generate_synthetic_corpus: knowledge base is empty");
    }
    if (!(entity_density > 0.0) || entity_density > 1.0) {
        throw std::invalid_argument("generate_synthetic_corpus: entity_density must be in (0, 1]");
    }
    if (n_records < 0) {
        throw std::invalid_argument("generate_synthetic_corpus: n_records must be >= 0");
    }

    std::mt19937_64 rng(seed);
    std::vector<ClinicalRecord> records;
    records.reserve(static_cast<std::size_t>(n_records));
    for (int r = 0; r < n_records; ++r) {
        ClinicalRecord rec;
        char id_buf[16];
        std::snprintf(id_buf, sizeof(id_buf), "syn-%05d", r + 1);
        rec.record_id = id_buf;
        rec.procedure_type = kProcedureTypes[uniform_below(rng, kProcedureTypes.size())];
        rec.techniques = "standard protocol";
        rec.indication = "followup of known condition";

        std::array<bool, synthetic_findings_slots> is_entity{};
        bool any = false;
        for (auto& flag : is_entity) {
            flag = uniform01(rng) < entity_density;
            any = any || flag;
        }
        if (!any) {
            is_entity[uniform_below(rng, is_entity.size())] = true;
        }

        // Distinct concepts per record when the KB allows it.
        std::vector<std::string> slot_entities;
        std::unordered_set<std::size_t> used;
        std::string findings;
        for (int s = 0; s < synthetic_findings_slots; ++s) {
            if (!findings.empty()) {
                findings.push_back(' ');
            }
            if (is_entity[static_cast<std::size_t>(s)]) {
                std::size_t idx = uniform_below(rng, kb.size());
                for (std::size_t attempt = 0; attempt < kb.size() && used.count(idx); ++attempt) {
                    idx = uniform_below(rng, kb.size());
                }
                used.insert(idx);
                const std::string& name = kb[idx].preferred_name;
                slot_entities.push_back(name);
                findings += fill_template(kEntityTemplates[uniform_below(rng, kEntityTemplates.size())], name);
            } else {
                findings += kFillerSentences[uniform_below(rng, kFillerSentences.size())];
            }
        }
        rec.findings = std::move(findings);

        std::vector<std::string> kept;
        for (const auto& name : slot_entities) {
            if (uniform01(rng) < 0.6) {
                kept.push_back(name);
            }
        }
        if (kept.empty()) {
            kept.push_back(slot_entities[uniform_below(rng, slot_entities.size())]);
        }
        std::string impression = "findings are consistent with ";
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (i > 0) {
                impression += " and ";
            }
            impression += kept[i];
        }
        impression += " .";
        rec.impression = std::move(impression);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace fsum
