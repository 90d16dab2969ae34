#include <cstdio>
int main(){std::puts("ssc cli placeholder");return 1;}
