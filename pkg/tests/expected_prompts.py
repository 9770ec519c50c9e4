"""Frozen canonical prompt lines for byte-fidelity checks. These pin the
shipped taxonomy data: any accidental edit to the YAML must fail acceptance."""

GATE_CONSTRAINT_LINES = [
    "You should answer No if the abstract primarily focuses on the application of option pricing, rather than the development or comparison of option pricing models themselves.",
    "You should answer Yes if the abstract focuses on methods of solving the existing option pricing or volatility model.",
    "You should answer No if the abstract is about real estate investment or real option.",
    "You should answer No if the abstract is purely about volatility and does not mention option pricing at all.",
    "You should answer No if the abstract is purely about Greeks and risk management and does not mention option pricing at all.",
    "You should answer No if the abstract is purely about hedging strategies and does not mention option pricing models at all.",
    "You should answer No if the abstract describes a application of option pricing principles to a non traditional financial market.",
    "You should answer No if the abstract is purely an empirical study testing the performance of existing, well-established option pricing models, without proposing any modifications or new solution methods.",
    "You should answer No if the abstract focuses on market microstructure related to options, such as bid-ask spreads or trading volume, without discussing model development.",
    "You should answer No if the abstract applies option pricing theory to model or predict bankruptcy or credit risk, without developing or comparing new option pricing models or solution methods.",
    "You should answer No if the abstract primarily focuses on comparing or developing volatility models without a direct focus on option pricing models or their solution methods.",
    "You should answer Yes if the abstract focuses on comparing different option pricing models, even if it involves an empirical study.",
    "You should answer No if the provided text is a list of diverse paper topics from a proceedings or collection, rather than a single abstract focused on developing or comparing pricing/volatility models.",
    "You should answer No if the abstract focuses on developing or comparing estimation methods for implied volatility surfaces, without directly developing or comparing option pricing models.",
    "You should answer No if the abstract focuses on developing or analyzing numerical methods for solving PDE used in option pricing, without directly developing or comparing option pricing models.",
    "You should answer No if the abstract applies option pricing theory to model or analyze insurance products, without developing or comparing new option pricing models or solution methods.",
    "You should answer No if the abstract applies option pricing theory to model or analyze real options or investment opportunities, without developing or comparing new option pricing models or solution methods.",
    "You should answer No if the abstract talks about cash-settled American-style options",
    "You should answer No if the abstract talks about energy markets",
    "You should answer No if the abstract talks about weather derivatives",
    "You should answer No if the abstract talks about employee stock options",
    "You should answer No if the abstract talks about vulnerable chained options",
    "You should answer No if the abstract contains the phrase 'The proceedings contain'",
]

FINAL_GATE_CONSTRAINT = ("You should answer No if the abstract contains the "
                         "phrase 'The proceedings contain'")

UNDERLYING_QUESTIONS = [
    "Does this abstract specify Stocks as underlying assets?",
    "Does this abstract specify Indexes as underlying assets?",
    "Does this abstract specify Commodities as underlying assets?",
    "Does this abstract specify Currencies as underlying assets?",
    "Does this abstract specify Interest Rates as underlying assets?",
    "Does this abstract specify Cryptocurrencies as underlying assets?",
]
