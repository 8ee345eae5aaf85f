"""
Desk-scale equation discovery
=============================

Generate two new structures, search their mutations on the synthetic clip
and compare the winner against the reference threshold.
"""

# %%
from lbp_discovery.bgs import BgsParams
from lbp_discovery.lbp import LbpConfig
from lbp_discovery.pipeline import RunConfig, baseline_record, discover, report, tune_vae
from lbp_discovery.synthetic import moving_square

space = {
    "enc_hidden": [32], "dec_hidden": [64], "enc_layers": [1], "dec_layers": [1],
    "enc_dropout": [0.0], "dec_dropout": [0.0], "n_batch": [32],
    "learning_rate": [0.005], "optimizer": ["Adam"],
}
run = RunConfig(K=2, cap=64, L=1, vae_space=space, vae_max_epochs=40,
                lbp=LbpConfig(region_radius=2), bgs=BgsParams(T_P=0.5))

# %%
model, trace = tune_vae(run)
print("selected VAE:", trace[0]["config"], "UVE", trace[0]["uve"])

# %%
clip = moving_square()
winner, records = discover(run, model, clip.frames, clip.gts, scene="square", records_path="discovery/records.jsonl")
base = baseline_record(run, clip.frames, clip.gts, scene="square")
print(len(records), "equations scored")
print("winner:  ", winner.equation, round(winner.fscore, 4))
print("baseline:", base.equation, round(base.fscore, 4))

# %%
print(report("discovery/records.jsonl", "discovery"))
