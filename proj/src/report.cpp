#include <algorithm>

#include "dsync/acquisition.hpp"
#include "json.hpp"

namespace dsync {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_to_json(const CorroborationMatrix& m) {
    json items = json::array();
    for (size_t i = 0; i < kEvidenceItems; ++i) {
        json row;
        row["item"] = to_string(static_cast<EvidenceItem>(i));
        row["verdict"] = to_string(m.verdicts[i]);
        json cells = json::array();
        for (size_t s = 0; s < kEvidenceSources; ++s) {
            const MatrixCell& c = m.cells[i][s];
            json cell;
            cell["source"] = to_string(static_cast<EvidenceSource>(s));
            cell["state"] = to_string(c.state);
            if (!c.values.empty()) cell["values"] = c.values;
            cells.push_back(std::move(cell));
        }
        row["cells"] = std::move(cells);
        items.push_back(std::move(row));
    }
    json out;
    out["items"] = std::move(items);
    out["conflicts"] = m.conflicts;
    return out;
}

std::string recovered_rel_path(const EvidenceRecord& r) {
    return "recovered/" + r.target.share.hex() + "/" + r.target.path;
}

json record_to_json(const EvidenceRecord& r) {
    json o;
    o["share"] = r.target.share.hex();
    o["path"] = r.target.path;
    o["reason"] = to_string(r.target.reason);
    o["expected_sha1"] = hex(r.target.expected_hash);
    o["status"] = to_string(r.verification.status);
    o["verified_pieces"] = r.verification.verified_pieces;
    o["failed_pieces"] = r.verification.failed_pieces;
    o["missing_pieces"] = r.verification.missing_pieces;
    if (r.meta_used) {
        o["piece_len"] = r.meta_used->piece_len;
        o["piece_count"] = r.meta_used->piece_count();
        o["aggregate_sha1"] = hex(r.meta_used->aggregate_hash);
    }
    if (r.verification.missing_pieces.empty() && r.meta_used) {
        o["recovered_sha1"] = hex(r.whole_hash);
        o["recovered_file"] = recovered_rel_path(r);
    }
    json sources = json::array();
    for (const auto& [peer, indices] : r.sources) {
        json s;
        s["peer"] = peer.peer.hex();
        s["addr"] = peer.addr.text();
        s["pieces"] = indices;
        sources.push_back(std::move(s));
    }
    o["sources"] = std::move(sources);
    json custody = json::array();
    for (const auto& e : r.custody) {
        json c;
        c["t_ms"] = e.t_ms;
        c["epoch"] = e.epoch;
        c["action"] = e.action;
        c["detail"] = e.detail;
        custody.push_back(std::move(c));
    }
    o["custody"] = std::move(custody);
    return o;
}

json report_core(const EvidenceReport& report) {
    json core;
    json meta;
    meta["id"] = report.meta.case_id;
    meta["investigator"] = report.meta.investigator;
    meta["evidence"] = report.meta.evidence_path;
    core["case"] = std::move(meta);
    core["matrix"] = matrix_to_json(report.matrix);
    json records = json::array();
    for (const auto& r : report.records) records.push_back(record_to_json(r));
    core["records"] = std::move(records);
    return core;
}

void reverify_record(const EvidenceRecord& r) {
    auto fail = [&](const std::string& why) {
        throw AcquisitionError(AcqErr::ReverificationFailed,
                               r.target.path + ": " + why + " — evidence tampered or corrupted");
    };
    if (!r.meta_used) {
        if (!r.pieces.empty()) fail("pieces present without piece metadata");
        return;
    }
    const FileMeta& meta = *r.meta_used;
    for (const auto& [index, bytes] : r.pieces) {
        bool ok = false;
        try {
            ok = verify_piece(bytes, index, meta);
        } catch (const IntegrityError&) {
            ok = false;
        }
        if (!ok) fail("piece " + std::to_string(index) + " no longer verifies");
    }
    if (r.verification.missing_pieces.empty()) {
        Bytes joined;
        for (uint32_t i = 0; i < meta.piece_count(); ++i) {
            auto it = r.pieces.find(i);
            if (it == r.pieces.end()) fail("piece " + std::to_string(i) + " absent");
            joined += it->second;
        }
        if (joined != r.assembled) fail("assembled bytes diverge from the piece map");
        if (sha1(r.assembled) != r.whole_hash) fail("whole-file hash no longer matches");
        if (r.verification.status == VerifyStatus::FULL_MATCH &&
            r.whole_hash != r.target.expected_hash)
            fail("FULL_MATCH record does not match the expected hash");
    }
}

}  // namespace

EvidenceReport build_report(std::vector<EvidenceRecord> records, CorroborationMatrix matrix,
                            CaseMetadata meta) {
    for (const auto& r : records) reverify_record(r);
    EvidenceReport report;
    report.meta = std::move(meta);
    report.matrix = std::move(matrix);
    report.records = std::move(records);
    report.digest = hex(sha1(report_core(report).dump()));
    return report;
}

std::string report_to_json(const EvidenceReport& report) {
    json full;
    full["report"] = report_core(report);
    full["digest"] = report.digest;
    return full.dump(2) + "\n";
}

std::string report_to_text(const EvidenceReport& report) {
    std::string out;
    out += "EVIDENCE REPORT\n";
    out += "===============\n";
    out += "Case:          " + report.meta.case_id + "\n";
    out += "Investigator:  " + report.meta.investigator + "\n";
    out += "Evidence:      " + report.meta.evidence_path + "\n";
    out += "Report digest: " + report.digest + "\n\n";

    out += "Corroboration matrix\n";
    out += "--------------------\n";
    for (size_t i = 0; i < kEvidenceItems; ++i) {
        auto item = static_cast<EvidenceItem>(i);
        out += std::string(to_string(item));
        out += " [" + std::string(to_string(report.matrix.verdicts[i])) + "]\n";
        for (size_t s = 0; s < kEvidenceSources; ++s) {
            const MatrixCell& c = report.matrix.cells[i][s];
            if (c.state == CellState::NotApplicable) continue;
            out += "    " + std::string(to_string(static_cast<EvidenceSource>(s))) + ": " +
                   to_string(c.state);
            if (!c.values.empty()) {
                out += " (";
                for (size_t k = 0; k < c.values.size(); ++k)
                    out += (k > 0 ? ", " : "") + c.values[k];
                out += ")";
            }
            out += "\n";
        }
    }
    if (!report.matrix.conflicts.empty()) {
        out += "Conflicts:\n";
        for (const auto& c : report.matrix.conflicts) out += "    " + c + "\n";
    }

    out += "\nRecovery records: " + std::to_string(report.records.size()) + "\n";
    out += "-----------------\n";
    if (report.records.empty()) out += "No recoverable targets were identified.\n";
    size_t index = 1;
    for (const auto& r : report.records) {
        out += "[" + std::to_string(index++) + "] " + r.target.path + " (share " +
               r.target.share.hex() + ")\n";
        out += "    reason:        " + std::string(to_string(r.target.reason)) + "\n";
        out += "    status:        " + std::string(to_string(r.verification.status)) + "\n";
        out += "    expected SHA1: " + hex(r.target.expected_hash) + "\n";
        if (r.verification.missing_pieces.empty() && r.meta_used)
            out += "    recovered SHA1:" + std::string(" ") + hex(r.whole_hash) + "\n";
        if (r.meta_used) {
            out += "    pieces:        " +
                   std::to_string(r.verification.verified_pieces.size()) + "/" +
                   std::to_string(r.meta_used->piece_count()) + " verified";
            if (!r.verification.missing_pieces.empty()) {
                out += ", missing {";
                bool first = true;
                for (uint32_t i : r.verification.missing_pieces) {
                    out += (first ? "" : ",") + std::to_string(i);
                    first = false;
                }
                out += "}";
            }
            out += "\n";
        }
        for (const auto& [peer, indices] : r.sources) {
            out += "    source:        " + peer.peer.hex() + " @ " + peer.addr.text() +
                   " served " + std::to_string(indices.size()) + " piece(s)\n";
        }
        out += "    custody log:   " + std::to_string(r.custody.size()) + " event(s)\n";
        for (const auto& e : r.custody)
            out += "        t=" + std::to_string(e.t_ms) + "ms epoch=" + std::to_string(e.epoch) +
                   " " + e.action + " " + e.detail + "\n";
    }
    return out;
}

void write_report_files(const EvidenceReport& report, const fs::path& case_dir) {
    fs::create_directories(case_dir);
    write_file(case_dir / "report.json", report_to_json(report));
    write_file(case_dir / "report.txt", report_to_text(report));
    for (const auto& r : report.records) {
        if (!safe_rel_path(r.target.path)) continue;
        fs::path base = case_dir / "recovered" / r.target.share.hex();
        if (r.verification.missing_pieces.empty() && r.meta_used) {
            write_file(base / fs::path(r.target.path), r.assembled);
        } else {
            for (const auto& [index, bytes] : r.pieces)
                write_file(base / fs::path(r.target.path + ".piece" + std::to_string(index)),
                           bytes);
        }
    }
}

}  // namespace dsync
