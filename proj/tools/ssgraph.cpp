#include "ssg/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ssg::run_cli(argc, argv, std::cout, std::cerr); }
