#include "dxr/kb_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace dxr {

namespace {

const std::set<std::string> kTopLevelKeys = {"version", "diseases", "manifestations", "treatments", "subvalues"};

// Field access with a path for error messages, e.g. "diseases[3].prior".
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const json& node() const { return j_; }
    const std::string& path() const { return path_; }

    Reader at(std::string_view key) const {
        expect_object();
        auto it = j_.find(std::string(key));
        if (it == j_.end()) fail(child(key), "missing field");
        return Reader(*it, child(key));
    }
    bool has(std::string_view key) const { return j_.is_object() && j_.contains(std::string(key)); }

    Reader at(std::size_t i) const { return Reader(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }

    std::size_t array_size() const {
        if (!j_.is_array()) fail(path_, "expected array");
        return j_.size();
    }
    void expect_object() const {
        if (!j_.is_object()) fail(path_, "expected object");
    }
    std::string str() const {
        if (!j_.is_string()) fail(path_, "expected string");
        return j_.get<std::string>();
    }
    double num() const {
        if (!j_.is_number()) fail(path_, "expected number");
        return j_.get<double>();
    }
    int integer() const {
        if (!j_.is_number_integer()) fail(path_, "expected integer");
        return j_.get<int>();
    }
    std::vector<std::string> strings() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < array_size(); ++i) out.push_back(at(i).str());
        return out;
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ParseError(path + ": " + what);
    }

private:
    std::string child(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const json& j_;
    std::string path_;
};

std::string optional_name(const Reader& r) { return r.has("name") ? r.at("name").str() : std::string(); }

}  // namespace

json kb_to_json(const KnowledgeBase& kb) {
    json j;
    j["version"] = kb.version;
    j["diseases"] = json::array();
    for (const auto& d : kb.diseases) j["diseases"].push_back({{"id", d.id}, {"name", d.name}, {"prior", d.prior}});
    j["manifestations"] = json::array();
    for (const auto& m : kb.manifestations) {
        json links = json::array();
        for (const auto& l : m.links) links.push_back({{"disease", l.disease}, {"strength", l.strength}});
        j["manifestations"].push_back({{"id", m.id}, {"name", m.name}, {"leak", m.leak}, {"links", links}});
    }
    j["treatments"] = json::array();
    for (const auto& t : kb.treatments) j["treatments"].push_back({{"id", t.id}, {"name", t.name}, {"treats", t.treats}});
    j["subvalues"] = json::array();
    for (const auto& s : kb.subvalues) {
        json table = json::object();
        for (const auto& [k, v] : s.table) table[k] = v;
        j["subvalues"].push_back({{"id", s.id},
                                  {"disease_parents", s.disease_parents},
                                  {"treatment_parents", s.treatment_parents},
                                  {"table", table}});
    }
    return j;
}

KnowledgeBase kb_from_json(const json& j) {
    Reader root(j, "");
    root.expect_object();
    for (const auto& [key, _] : j.items()) {
        if (!kTopLevelKeys.count(key)) Reader::fail(key, "unexpected top-level key");
    }

    KnowledgeBase kb;
    kb.version = root.at("version").integer();

    auto diseases = root.at("diseases");
    for (std::size_t i = 0; i < diseases.array_size(); ++i) {
        auto r = diseases.at(i);
        kb.diseases.push_back({r.at("id").str(), optional_name(r), r.at("prior").num()});
    }
    auto manifestations = root.at("manifestations");
    for (std::size_t i = 0; i < manifestations.array_size(); ++i) {
        auto r = manifestations.at(i);
        Manifestation m{r.at("id").str(), optional_name(r), r.has("leak") ? r.at("leak").num() : 0.0, {}};
        auto links = r.at("links");
        for (std::size_t k = 0; k < links.array_size(); ++k) {
            auto l = links.at(k);
            m.links.push_back({l.at("disease").str(), l.at("strength").num()});
        }
        kb.manifestations.push_back(std::move(m));
    }
    auto treatments = root.at("treatments");
    for (std::size_t i = 0; i < treatments.array_size(); ++i) {
        auto r = treatments.at(i);
        kb.treatments.push_back({r.at("id").str(), optional_name(r), r.at("treats").strings()});
    }
    auto subvalues = root.at("subvalues");
    for (std::size_t i = 0; i < subvalues.array_size(); ++i) {
        auto r = subvalues.at(i);
        SubvalueNode s;
        s.id = r.at("id").str();
        s.disease_parents = r.at("disease_parents").strings();
        s.treatment_parents = r.at("treatment_parents").strings();
        auto table = r.at("table");
        table.expect_object();
        for (const auto& [key, value] : table.node().items()) s.table[key] = table.at(key).num();
        kb.subvalues.push_back(std::move(s));
    }
    return kb;
}

std::string dump_kb(const KnowledgeBase& kb) { return kb_to_json(canonicalize(kb)).dump(2) + "\n"; }

json parse_json_text(std::string_view text, std::string_view what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ParseError(std::string(what) + ": line " + std::to_string(line) + ": " + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot write file");
    out << text;
}

KnowledgeBase parse_kb(std::string_view text) {
    KnowledgeBase kb = kb_from_json(parse_json_text(text, "kb"));
    if (auto v = validate_kb(kb); !v.empty()) throw ValidationError(std::move(v));
    return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_kb(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) { write_text_file(path, dump_kb(kb)); }

json findings_to_json(const Findings& f) {
    return {{"present", json(std::vector<std::string>(f.present.begin(), f.present.end()))},
            {"absent", json(std::vector<std::string>(f.absent.begin(), f.absent.end()))}};
}

Findings findings_from_json(const json& j) {
    Reader root(j, "");
    root.expect_object();
    for (const auto& [key, _] : j.items()) {
        if (key != "present" && key != "absent") Reader::fail(key, "unexpected key");
    }
    auto list = [&](const char* key) {
        std::set<std::string> out;
        if (!root.has(key)) return out;
        for (auto& s : root.at(key).strings()) out.insert(std::move(s));
        return out;
    };
    return Findings::make(list("present"), list("absent"));
}

Findings load_findings(const std::filesystem::path& path) {
    return findings_from_json(parse_json_text(read_text_file(path), path.string()));
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string kb_hash(const KnowledgeBase& kb) { return sha256_hex(kb_to_json(canonicalize(kb)).dump()); }

std::string findings_hash(const Findings& f) { return sha256_hex(findings_to_json(f).dump()); }

}  // namespace dxr
