#include "mhier/io.hpp"

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace mhier {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    fs::path tmp = dir / (path.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("rename failed: " + ec.message());
    }
}

std::string csv_provenance(const std::string& config_hash) {
    return "# config=" + config_hash + " schema=" + std::to_string(kSchemaVersion) + "\n";
}

std::string trajectory_csv(const Trajectory& traj, const std::string& header_comment,
                           const std::string& source) {
    std::string out = header_comment;
    out += "t,q,p,H_eff";
    const int dim = traj.n_max >= 2 ? MomentLayout::count(traj.n_max) : 0;
    for (int i = 0; i < dim; ++i) {
        const MomentKey k = MomentLayout::key_at(i);
        out += ",G_" + std::to_string(k.a) + "_" + std::to_string(k.b);
    }
    if (!source.empty()) out += ",source";
    out += '\n';
    for (size_t r = 0; r < traj.size(); ++r) {
        out += format_g17(traj.times[r]);
        out += ',';
        out += format_g17(traj.states[r][0]);
        out += ',';
        out += format_g17(traj.states[r][1]);
        out += ',';
        out += format_g17(traj.h_eff[r]);
        for (int i = 0; i < dim; ++i) {
            out += ',';
            out += format_g17(traj.states[r][static_cast<size_t>(i) + 2]);
        }
        if (!source.empty()) {
            out += ',';
            out += source;
        }
        out += '\n';
    }
    return out;
}

std::string wide_csv(const std::string& abscissa_name, const std::vector<double>& abscissa,
                     const std::vector<std::string>& column_names,
                     const std::vector<std::vector<double>>& columns,
                     const std::string& header_comment) {
    if (column_names.size() != columns.size())
        throw std::invalid_argument("wide_csv: name/column count mismatch");
    for (const auto& c : columns)
        if (c.size() != abscissa.size())
            throw std::invalid_argument("wide_csv: column length mismatch");
    std::string out = header_comment;
    out += abscissa_name;
    for (const auto& n : column_names) {
        out += ',';
        out += n;
    }
    out += '\n';
    for (size_t r = 0; r < abscissa.size(); ++r) {
        out += format_g17(abscissa[r]);
        for (const auto& c : columns) {
            out += ',';
            out += format_g17(c[r]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace mhier
