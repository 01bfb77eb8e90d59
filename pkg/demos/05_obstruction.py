"""A closed form that is not a gradient, and how the pipeline notices.

On a box with a disk removed, the angular form is closed everywhere yet
integrates to 2*pi around the hole.  An operator shifted by it satisfies
both divergence identities locally, but no single volume reproduces it on
the whole chart; the nonzero loop period is the certificate.
"""

import math

from divkit import (
    Chart,
    ClassifyConfig,
    OneForm,
    Path,
    VolumeForm,
    classify,
    div_volume,
    monodromy_period,
    perturbed_operator,
)

annulus = Chart(("x", "y"), ((-1.0, 1.0), (-1.0, 1.0)),
                disks=(((0.0, 0.0), 0.2),), basepoint=(0.6, 0.0))
flat = div_volume(VolumeForm.from_string(annulus, "1"))
angular = OneForm.from_strings(annulus,
                               ["-y/(x^2 + y^2)", "x/(x^2 + y^2)"])
op = perturbed_operator(flat, angular)


def loop(radius, winds=1):
    w = winds * 2 * math.pi
    return Path.from_strings(annulus, [f"{radius}*cos({w}*t)",
                                       f"{radius}*sin({w}*t)"])


for label, path in [("r=0.5", loop(0.5)), ("r=0.7", loop(0.7)),
                    ("r=0.5 twice", loop(0.5, winds=2))]:
    print(f"period around {label}: {monodromy_period(angular, path):.9f}")
print("2*pi =", 2 * math.pi)

config = ClassifyConfig(loops=(("circle", loop(0.5)),))
result = classify(op, flat, config=config)
print("verdict:", result.verdict)
print("witness:", result.witness)

# an exact shift on the same chart still classifies as a divergence,
# restricted to a disk-free slab where straight segments make sense
exact = perturbed_operator(flat, OneForm.from_strings(annulus, ["2*x", "-1"]))
result = classify(exact, flat, config=config)
print("exact shift verdict:", result.verdict,
      "on box", result.restricted_to.box)
