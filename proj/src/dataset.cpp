#include "gstk/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include "gstk/errors.hpp"

namespace gs {

namespace {

struct PhenoRow {
    std::string value;
    std::size_t line_no;
};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

// id -> raw value for one trait.
std::map<std::string, PhenoRow> read_phenotypes(const std::string& path,
                                                const std::string& trait) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open phenotype file '" + path + "'");

    std::map<std::string, PhenoRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "sample_id,trait,value") {
                throw ParseError(path + ":1: expected header `sample_id,trait,value`, got `" +
                                 line + "`");
            }
            saw_header = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 3) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected 3 comma-separated fields, got " +
                             std::to_string(fields.size()));
        }
        if (fields[1] != trait) continue;
        auto [it, inserted] = rows.emplace(fields[0], PhenoRow{fields[2], line_no});
        if (!inserted) {
            throw ValueError(path + ":" + std::to_string(line_no) +
                             ": duplicate phenotype row for sample '" + fields[0] +
                             "', trait '" + trait + "' (first at line " +
                             std::to_string(it->second.line_no) + ")");
        }
    }
    if (!saw_header) throw ParseError(path + ": missing header line");
    return rows;
}

double parse_regression_value(const std::string& text, const std::string& path,
                              std::size_t line_no) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || text.empty()) {
        throw ValueError(path + ":" + std::to_string(line_no) + ": '" + text +
                         "' is not a decimal number");
    }
    return v;
}

}  // namespace

Dataset load_dataset(const std::string& seq_path, const std::string& pheno_path,
                     const std::string& trait, Task task) {
    const auto seqs = read_sequence_file(seq_path);
    if (seqs.empty()) throw EmptySequence("sequence file '" + seq_path + "' has no records");
    const auto pheno = read_phenotypes(pheno_path, trait);

    Dataset ds;
    ds.task = task;
    ds.seq_length = seqs.front().length();
    ds.samples.reserve(seqs.size());

    for (const SnpSequence& s : seqs) {
        const auto it = pheno.find(s.id);
        if (it == pheno.end()) {
            throw JoinError("sample '" + s.id + "' has no phenotype row for trait '" +
                            trait + "' in '" + pheno_path + "'");
        }
        Sample sample;
        sample.id = s.id;
        sample.seq = preprocess(s);
        if (task == Task::regression) {
            sample.value = parse_regression_value(it->second.value, pheno_path,
                                                  it->second.line_no);
        }
        ds.samples.push_back(std::move(sample));
    }

    if (task == Task::classification) {
        // Dense ids in sorted label order, stable under file reordering.
        std::vector<std::string> names;
        for (const SnpSequence& s : seqs) {
            names.push_back(pheno.at(s.id).value);
        }
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        ds.label_names = names;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            const std::string& raw = pheno.at(seqs[i].id).value;
            const auto pos = std::lower_bound(names.begin(), names.end(), raw);
            ds.samples[i].label = static_cast<int>(pos - names.begin());
            ds.samples[i].value = static_cast<double>(ds.samples[i].label);
        }
    }
    return ds;
}

}  // namespace gs
