#include <iostream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "cli.hpp"

int main(int argc, char** argv)
{
#ifdef __GLIBC__
    // Large activation buffers are reused every batch; keep them off mmap.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    std::vector<std::string> args(argv + 1, argv + argc);
    return mvts::cli::run(args, std::cout, std::cerr);
}
