"""Headless play-through of the mini level: every mechanic in one run.

Scripts the inputs a player would produce: walk forward, collect a
crystal, slide along w through the corridor wall, fire a w-oscillating
bullet, preview and confirm a 4D manipulation, then switch to frustum
projection, orbit the 4D camera, and glide back.

Run: python3 demos/session_walkthrough.py
"""

from continuum4d import Inputs, PlaneAngles, Session, load_scene_file

scene = load_scene_file("scenes/mini_level.json")
session = Session(scene, seed=4)

script = {}
for tick in range(60, 200):
    script[tick] = Inputs(keys=frozenset({"w"}))          # walk forward
for tick in range(260, 330):
    script[tick] = Inputs(keys=frozenset({"e"}))          # climb along w
script[360] = Inputs(actions=({"type": "fire"},))         # w-sine bullet
for tick in range(380, 450):
    script[tick] = Inputs(keys=frozenset({"q"}))          # come back down
script[520] = Inputs(actions=({"type": "toggle_mode"},))  # frustum on
for tick in range(530, 640):
    script[tick] = Inputs(keys=frozenset({"z"}))          # orbit the 4D cam
script[700] = Inputs(actions=({"type": "toggle_mode"},))  # glide back

interesting = {"pickup", "node-appeared", "node-vanished", "collision",
               "mode-switch", "projectile-spawned", "animation-started",
               "insufficient-energy", "manipulated"}
for tick in range(900):
    frame = session.tick(script.get(tick, Inputs()))
    for event in frame.events:
        if event["type"] in interesting:
            w = session.player.pose.translation.w
            print(f"t={frame.time:6.2f}s w={w:+.2f} energy={frame.energy:5.1f}  {event}")

print("\nGhost previews of rotating the bridge block (state untouched):")
for angles in (PlaneAngles(), PlaneAngles(xw=0.6), PlaneAngles(xw=1.2)):
    (preview,) = session.ghost_previews(6, [angles])
    shape = "(empty)" if preview.is_empty else \
        f"{preview.n_vertices} vertices / {preview.n_triangles} triangles"
    print(f"  xw={angles.xw:.1f}: {shape}")
session.energy = 50.0
session.apply_manipulation(6, PlaneAngles(xw=1.2))
print("confirmed the xw=1.2 rotation;",
      f"final state hash {session.state_hash()[:16]}...")
