/* Synthetic CPU-bound workload with a known time split.
 *
 * run_workload() alternates between spin_a() and spin_b(); both burn the
 * same loop body, spin_a for A_UNITS iterations and spin_b for B_UNITS, so
 * CPU time divides A_UNITS : B_UNITS between them (70 : 30 by default).
 *
 * usage: busyloop <seconds> [a_units b_units]
 */
#include <stdlib.h>
#include <time.h>

#define CHUNK 20000L

static volatile unsigned long sink;

__attribute__((noinline)) void burn(long n)
{
    unsigned long x = sink;
    for (long i = 0; i < n * CHUNK; i++)
        x = x * 6364136223846793005UL + 1442695040888963407UL;
    sink = x;
}

__attribute__((noinline)) void spin_a(long units) { burn(units); }

__attribute__((noinline)) void spin_b(long units) { burn(units); }

__attribute__((noinline)) void run_workload(double seconds, long a, long b)
{
    struct timespec t0, t;
    clock_gettime(CLOCK_MONOTONIC, &t0);
    do {
        spin_a(a);
        spin_b(b);
        clock_gettime(CLOCK_MONOTONIC, &t);
    } while ((t.tv_sec - t0.tv_sec) + (t.tv_nsec - t0.tv_nsec) / 1e9 < seconds);
}

int main(int argc, char **argv)
{
    double seconds = argc > 1 ? atof(argv[1]) : 10.0;
    long a = argc > 3 ? atol(argv[2]) : 7;
    long b = argc > 3 ? atol(argv[3]) : 3;
    run_workload(seconds, a, b);
    return 0;
}
