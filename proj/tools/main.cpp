#include <cstdio>
int main(){ std::puts("dslab"); return 0; }
