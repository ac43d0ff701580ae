#include "ssep/config.hpp"

#include "ssep/errors.hpp"
#include "ssep/theory.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace ssep::cli
{
    namespace
    {
        class Reader
        {
        public:
            explicit Reader(std::string source) : source_(std::move(source)) {}

            [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) const
            {
                std::string where = source_;
                if (n.IsDefined() && n.Mark().line >= 0)
                    where += ":" + std::to_string(n.Mark().line + 1);
                throw ConfigError(where + ": " + field + ": " + msg);
            }

            void keys(const YAML::Node& map, const std::string& field, const std::set<std::string>& allowed) const
            {
                if (!map.IsMap())
                    fail(map, field, "expected a mapping");
                for (const auto& kv : map)
                {
                    const auto key = kv.first.as<std::string>();
                    if (!allowed.count(key))
                        fail(kv.first, field.empty() ? key : field + "." + key, "unknown key");
                }
            }

            template <class T>
            T scalar(const YAML::Node& n, const std::string& field) const
            {
                if (!n.IsScalar())
                    fail(n, field, "expected a scalar");
                try
                {
                    return n.as<T>();
                }
                catch (const YAML::Exception&)
                {
                    fail(n, field, "cannot read '" + n.Scalar() + "'");
                }
            }

            double real(const YAML::Node& n, const std::string& field) const
            {
                const auto v = scalar<double>(n, field);
                if (!std::isfinite(v))
                    fail(n, field, "must be finite");
                return v;
            }

            std::int64_t integer(const YAML::Node& n, const std::string& field) const
            {
                // accept 5e7-style literals when they are integral
                const double v = real(n, field);
                if (v != std::floor(v) || std::abs(v) > 9.0e15)
                    fail(n, field, "must be an integer");
                return static_cast<std::int64_t>(v);
            }

            std::vector<double> reals(const YAML::Node& n, const std::string& field) const
            {
                std::vector<double> out;
                if (n.IsScalar())
                    return {real(n, field)};
                if (!n.IsSequence())
                    fail(n, field, "expected a number or a list of numbers");
                for (std::size_t i = 0; i < n.size(); ++i)
                    out.push_back(real(n[i], field + "[" + std::to_string(i) + "]"));
                return out;
            }

            sim::Site site(const YAML::Node& n, const std::string& field) const
            {
                if (!n.IsSequence() || n.size() == 0)
                    fail(n, field, "expected a nonempty list of integers");
                sim::Site s;
                for (std::size_t i = 0; i < n.size(); ++i)
                    s.push_back(integer(n[i], field + "[" + std::to_string(i) + "]"));
                return s;
            }

        private:
            std::string source_;
        };

        ShapeFunction parse_shape(const Reader& rd, const YAML::Node& n, const std::string& field)
        {
            if (!n.IsMap())
                rd.fail(n, field, "expected {c, alpha, r}, {constant} or {grid, values, derivatives}");
            try
            {
                if (n["constant"])
                {
                    rd.keys(n, field, {"constant"});
                    return ShapeFunction::constant(rd.real(n["constant"], field + ".constant"));
                }
                if (n["grid"])
                {
                    rd.keys(n, field, {"grid", "values", "derivatives"});
                    if (!n["values"])
                        rd.fail(n, field, "tabulated shape needs values");
                    std::vector<double> der;
                    if (n["derivatives"])
                        der = rd.reals(n["derivatives"], field + ".derivatives");
                    return ShapeFunction::tabulated(rd.reals(n["grid"], field + ".grid"),
                                                    rd.reals(n["values"], field + ".values"), der);
                }
                rd.keys(n, field, {"c", "alpha", "r"});
                if (!n["c"] || !n["alpha"])
                    rd.fail(n, field, "polynomial shape needs c and alpha");
                return ShapeFunction::polynomial(rd.real(n["c"], field + ".c"), rd.real(n["alpha"], field + ".alpha"),
                                                 n["r"] ? rd.real(n["r"], field + ".r") : 0.0);
            }
            catch (const DomainError& e)
            {
                rd.fail(n, field, e.what());
            }
        }

        std::string fmt(double v)
        {
            // shortest text that reads back to the same double
            char buf[40];
            for (int p = 1; p <= 17; ++p)
            {
                std::snprintf(buf, sizeof buf, "%.*g", p, v);
                if (std::strtod(buf, nullptr) == v)
                    break;
            }
            return buf;
        }

        std::string list(const std::vector<double>& v)
        {
            std::string s = "[";
            for (std::size_t i = 0; i < v.size(); ++i)
                s += (i ? ", " : "") + fmt(v[i]);
            return s + "]";
        }

        std::string site_text(const sim::Site& x)
        {
            std::string s = "[";
            for (std::size_t i = 0; i < x.size(); ++i)
                s += (i ? ", " : "") + std::to_string(x[i]);
            return s + "]";
        }
    } // namespace

    int Manifest::dim() const
    {
        if (profile)
            return profile->dim();
        if (!initial_sites.empty())
            return static_cast<int>(initial_sites.front().size());
        throw ConfigError(source + ": configuration needs a profile or initial_sites");
    }

    std::vector<double> Manifest::times() const
    {
        if (schedule)
        {
            std::vector<double> out;
            double t = schedule->t0;
            for (int i = 0; i < schedule->n; ++i, t *= schedule->ratio)
                out.push_back(t);
            return out;
        }
        return t;
    }

    std::vector<std::pair<double, double>> Manifest::levels(double time) const
    {
        if (z)
            return {{std::numeric_limits<double>::quiet_NaN(), *z}};
        if (!profile)
            throw ConfigError(source + ": x-scaled levels need a profile; give z instead");
        std::vector<std::pair<double, double>> out;
        for (double xv : x)
            out.emplace_back(xv, theory::scaling_for(profile->dim(), profile->beta(), time, xv).z);
        return out;
    }

    sim::SimConfig Manifest::sim_config(double time, double level) const
    {
        sim::SimConfig c;
        c.profile = profile;
        c.initial_sites = initial_sites;
        c.box = box;
        c.t_end = time;
        c.z = level;
        c.trunc_eps = trunc_eps;
        c.depth = depth;
        c.dynamics = dynamics;
        c.init = init;
        c.seed = seed;
        c.record = record;
        c.order_stats_m_max = order_stats_m_max;
        c.max_particles = max_particles;
        return c;
    }

    Manifest parse_manifest(const std::string& text, const std::string& source)
    {
        Reader rd(source);
        YAML::Node root;
        try
        {
            root = YAML::Load(text);
        }
        catch (const YAML::ParserException& e)
        {
            throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": syntax: " + e.msg);
        }
        if (!root.IsDefined() || root.IsNull())
            throw ConfigError(source + ": empty configuration");
        rd.keys(root, "",
                {"d", "profile", "density", "t", "schedule", "x", "z", "trunc_eps", "depth", "dynamics", "init",
                 "seed", "replicas", "threads", "order_stats_m_max", "record", "initial_sites", "box",
                 "max_particles", "acceptance_scale"});

        Manifest m;
        m.source = source;
        if (root["profile"])
        {
            if (!root["d"])
                rd.fail(root, "d", "required with a profile");
            const auto d = rd.integer(root["d"], "d");
            if (d < 2)
                rd.fail(root["d"], "d", "must be >= 2 (got " + std::to_string(d) + ")");
            const YAML::Node p = root["profile"];
            if (!p.IsSequence())
                rd.fail(p, "profile", "expected a list of d - 1 shape records");
            if (static_cast<std::int64_t>(p.size()) != d - 1)
                rd.fail(p, "profile", "expected " + std::to_string(d - 1) + " shape records, got " +
                                          std::to_string(p.size()));
            std::vector<ShapeFunction> shapes;
            for (std::size_t i = 0; i < p.size(); ++i)
                shapes.push_back(parse_shape(rd, p[i], "profile[" + std::to_string(i) + "]"));
            std::optional<PeriodicDensity> density;
            if (root["density"])
                density = PeriodicDensity{rd.reals(root["density"], "density")};
            try
            {
                m.profile = Profile(static_cast<int>(d), std::move(shapes), density);
            }
            catch (const DomainError& e)
            {
                rd.fail(root["density"] ? root["density"] : p, "profile", e.what());
            }
        }
        else if (root["d"] || root["density"])
            rd.fail(root["d"] ? root["d"] : root["density"], "profile", "d and density need a profile");

        if (root["initial_sites"])
        {
            const YAML::Node s = root["initial_sites"];
            if (!s.IsSequence())
                rd.fail(s, "initial_sites", "expected a list of sites");
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                m.initial_sites.push_back(rd.site(s[i], "initial_sites[" + std::to_string(i) + "]"));
                if (m.initial_sites.back().size() != m.initial_sites.front().size())
                    rd.fail(s[i], "initial_sites", "sites of different dimensions");
            }
            if (m.profile && !m.initial_sites.empty() && static_cast<int>(m.initial_sites.front().size()) != m.profile->dim())
                rd.fail(s, "initial_sites", "dimension differs from d");
        }
        if (!m.profile && m.initial_sites.empty())
            rd.fail(root, "profile", "a profile or initial_sites is required");
        if (root["box"])
        {
            const YAML::Node b = root["box"];
            rd.keys(b, "box", {"lo", "hi"});
            if (!b["lo"] || !b["hi"])
                rd.fail(b, "box", "needs lo and hi");
            m.box = sim::Box{rd.site(b["lo"], "box.lo"), rd.site(b["hi"], "box.hi")};
            if (m.box->lo.size() != static_cast<std::size_t>(m.dim()) || m.box->hi.size() != m.box->lo.size())
                rd.fail(b, "box", "corner dimension differs from the lattice");
        }

        if (root["schedule"] && root["t"])
            rd.fail(root["schedule"], "schedule", "give either t or schedule, not both");
        if (root["schedule"])
        {
            const YAML::Node s = root["schedule"];
            rd.keys(s, "schedule", {"t0", "ratio", "n"});
            if (!s["t0"] || !s["ratio"] || !s["n"])
                rd.fail(s, "schedule", "needs t0, ratio and n");
            Schedule sc{rd.real(s["t0"], "schedule.t0"), rd.real(s["ratio"], "schedule.ratio"),
                        static_cast<int>(rd.integer(s["n"], "schedule.n"))};
            if (sc.t0 < 0.0 || sc.ratio <= 0.0 || sc.n < 1)
                rd.fail(s, "schedule", "needs t0 >= 0, ratio > 0, n >= 1");
            m.schedule = sc;
        }
        else if (root["t"])
        {
            m.t = rd.reals(root["t"], "t");
            for (double v : m.t)
                if (v < 0.0)
                    rd.fail(root["t"], "t", "times must be nonnegative");
        }
        else
            rd.fail(root, "t", "t or schedule is required");

        if (root["x"] && root["z"])
            rd.fail(root["z"], "z", "give either x or z, not both");
        if (root["x"])
            m.x = rd.reals(root["x"], "x");
        if (root["z"])
            m.z = rd.real(root["z"], "z");
        if (!m.z && !m.profile)
            rd.fail(root, "z", "required without a profile");

        if (root["trunc_eps"])
        {
            m.trunc_eps = rd.real(root["trunc_eps"], "trunc_eps");
            if (!(m.trunc_eps > 0.0))
                rd.fail(root["trunc_eps"], "trunc_eps", "must be positive");
        }
        if (root["depth"])
        {
            m.depth = rd.integer(root["depth"], "depth");
            if (*m.depth < 0)
                rd.fail(root["depth"], "depth", "must be nonnegative");
        }
        if (root["dynamics"])
        {
            const auto v = rd.scalar<std::string>(root["dynamics"], "dynamics");
            if (v == "exclusion")
                m.dynamics = sim::Dynamics::exclusion;
            else if (v == "independent")
                m.dynamics = sim::Dynamics::independent;
            else
                rd.fail(root["dynamics"], "dynamics", "expected exclusion or independent, got '" + v + "'");
        }
        if (root["init"])
        {
            const auto v = rd.scalar<std::string>(root["init"], "init");
            if (v == "deterministic")
                m.init = sim::Init::deterministic;
            else if (v == "bernoulli")
                m.init = sim::Init::bernoulli;
            else
                rd.fail(root["init"], "init", "expected deterministic or bernoulli, got '" + v + "'");
        }
        if (root["seed"])
            m.seed = rd.scalar<std::uint64_t>(root["seed"], "seed");
        if (root["replicas"])
        {
            m.replicas = rd.integer(root["replicas"], "replicas");
            if (m.replicas < 2)
                rd.fail(root["replicas"], "replicas", "must be >= 2");
        }
        if (root["threads"])
        {
            m.threads = static_cast<int>(rd.integer(root["threads"], "threads"));
            if (m.threads < 1)
                rd.fail(root["threads"], "threads", "must be >= 1");
        }
        if (root["order_stats_m_max"])
        {
            m.order_stats_m_max = static_cast<int>(rd.integer(root["order_stats_m_max"], "order_stats_m_max"));
            if (m.order_stats_m_max < 0)
                rd.fail(root["order_stats_m_max"], "order_stats_m_max", "must be nonnegative");
        }
        if (root["record"])
        {
            const YAML::Node r = root["record"];
            if (!r.IsSequence())
                rd.fail(r, "record", "expected a list of site pairs");
            for (std::size_t i = 0; i < r.size(); ++i)
            {
                const std::string f = "record[" + std::to_string(i) + "]";
                if (!r[i].IsSequence() || r[i].size() != 2)
                    rd.fail(r[i], f, "expected a pair of sites");
                auto a = rd.site(r[i][0], f + "[0]"), b = rd.site(r[i][1], f + "[1]");
                if (a.size() != static_cast<std::size_t>(m.dim()) || b.size() != a.size())
                    rd.fail(r[i], f, "site dimension differs from the lattice");
                m.record.emplace_back(std::move(a), std::move(b));
            }
        }
        if (root["max_particles"])
        {
            m.max_particles = rd.integer(root["max_particles"], "max_particles");
            if (m.max_particles < 1)
                rd.fail(root["max_particles"], "max_particles", "must be positive");
        }
        if (root["acceptance_scale"])
        {
            m.acceptance_scale = rd.real(root["acceptance_scale"], "acceptance_scale");
            if (!(m.acceptance_scale > 0.0))
                rd.fail(root["acceptance_scale"], "acceptance_scale", "must be positive");
        }
        return m;
    }

    Manifest load_manifest(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError(path + ": cannot open");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_manifest(ss.str(), path);
    }

    std::string to_yaml(const Manifest& m)
    {
        std::ostringstream os;
        if (m.profile)
        {
            os << "d: " << m.profile->dim() << "\n";
            os << "profile:\n";
            for (const ShapeFunction& g : m.profile->shapes())
            {
                if (const auto* p = std::get_if<PolynomialShape>(&g.kind()))
                    os << "  - {c: " << fmt(p->c) << ", alpha: " << fmt(p->alpha) << ", r: " << fmt(p->r) << "}\n";
                else if (const auto* c = std::get_if<ConstantShape>(&g.kind()))
                    os << "  - {constant: " << fmt(c->value) << "}\n";
                else
                {
                    const auto& tb = std::get<TabulatedShape>(g.kind());
                    os << "  - {grid: " << list(tb.grid) << ", values: " << list(tb.values);
                    if (!tb.derivatives.empty())
                        os << ", derivatives: " << list(tb.derivatives);
                    os << "}\n";
                }
            }
            if (m.profile->density())
                os << "density: " << list(m.profile->density()->rho) << "\n";
        }
        if (!m.initial_sites.empty())
        {
            os << "initial_sites: [";
            for (std::size_t i = 0; i < m.initial_sites.size(); ++i)
                os << (i ? ", " : "") << site_text(m.initial_sites[i]);
            os << "]\n";
        }
        if (m.box)
            os << "box: {lo: " << site_text(m.box->lo) << ", hi: " << site_text(m.box->hi) << "}\n";
        if (m.schedule)
            os << "schedule: {t0: " << fmt(m.schedule->t0) << ", ratio: " << fmt(m.schedule->ratio)
               << ", n: " << m.schedule->n << "}\n";
        else
            os << "t: " << list(m.t) << "\n";
        if (m.z)
            os << "z: " << fmt(*m.z) << "\n";
        else
            os << "x: " << list(m.x) << "\n";
        os << "trunc_eps: " << fmt(m.trunc_eps) << "\n";
        if (m.depth)
            os << "depth: " << *m.depth << "\n";
        os << "dynamics: " << (m.dynamics == sim::Dynamics::exclusion ? "exclusion" : "independent") << "\n";
        os << "init: " << (m.init == sim::Init::deterministic ? "deterministic" : "bernoulli") << "\n";
        os << "seed: " << m.seed << "\n";
        os << "replicas: " << m.replicas << "\n";
        os << "threads: " << m.threads << "\n";
        os << "order_stats_m_max: " << m.order_stats_m_max << "\n";
        if (!m.record.empty())
        {
            os << "record:\n";
            for (const auto& [a, b] : m.record)
                os << "  - [" << site_text(a) << ", " << site_text(b) << "]\n";
        }
        os << "max_particles: " << m.max_particles << "\n";
        os << "acceptance_scale: " << fmt(m.acceptance_scale) << "\n";
        return os.str();
    }

    std::uint64_t fnv1a64(std::string_view bytes)
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : bytes)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::string hex64(std::uint64_t v)
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }
} // namespace ssep::cli
