#include "cli.hpp"

#include "fmmds/errors.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace fmmds;
    std::optional<cli::RunConfig> cfg;
    try
    {
        int code = 0;
        cfg     = cli::parse_run_config(argc, argv, &code);
        if (!cfg) return code;
    }
    catch (const cli::UsageError& e)
    {
        std::cerr << "fmmds: " << e.what() << '\n';
        return 2;
    }

    try
    {
        if (cfg->out == "-") return cli::run(*cfg, std::cout);
        std::ofstream file(cfg->out);
        if (!file)
        {
            std::cerr << "fmmds: cannot open " << cfg->out << '\n';
            return 2;
        }
        return cli::run(*cfg, file);
    }
    catch (const InfeasiblePartitionError& e)
    {
        std::cerr << "fmmds: infeasible partition: " << e.what() << '\n';
        return 3;
    }
    catch (const std::exception& e)
    {
        std::cerr << "fmmds: " << e.what() << '\n';
        return 3;
    }
}
