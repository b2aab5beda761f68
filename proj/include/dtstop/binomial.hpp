#pragma once

namespace dtstop {

struct BinomialPut {
    double spot = 100.0;
    double strike = 100.0;
    double rate = 0.06;
    double volatility = 0.2;
    double maturity = 0.5;
    int steps = 10000;
};

/// American put on a Cox-Ross-Rubinstein tree with early exercise at every node.
double american_put_crr(const BinomialPut& put);
/// Same tree without early exercise.
double european_put_crr(const BinomialPut& put);

}  // namespace dtstop
