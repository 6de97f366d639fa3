"""4D rigid bodies: elastic exchange, w-axis collisions, a settling stack.

Gravity acts along y only. Collisions measure true 4D distance, so two
spheres at the same (x, y, z) but offset in w really do touch once the
offset drops below the radius sum.

Run: python3 demos/physics_playground.py
"""

from continuum4d import (
    Hyperplane,
    Pose4,
    RigidBody4,
    SphereCollider,
    HalfSpaceCollider,
    Vec4,
    detect_collisions,
    resolve_contact,
)
from continuum4d.linalg import rotation_with_w_axis
from continuum4d.physics import FIXED_DT, step_world


def show(tag, body):
    p, v = body.pose.translation, body.linear_velocity
    print(f"  {tag}: pos ({p.x:+.2f}, {p.y:+.2f}, {p.z:+.2f}, {p.w:+.2f})"
          f"  vel ({v.x:+.2f}, {v.y:+.2f}, {v.z:+.2f}, {v.w:+.2f})")


print("Head-on elastic collision (equal masses exchange velocities):")
a = RigidBody4(pose=Pose4(Vec4(0, 0, 0, 0)), linear_velocity=Vec4(2, 0, 0, 0),
               collider=SphereCollider(1.0), restitution=1.0)
b = RigidBody4(pose=Pose4(Vec4(1.9, 0, 0, 0)), linear_velocity=Vec4(-1, 0, 0, 0),
               collider=SphereCollider(1.0), restitution=1.0)
(contact,) = detect_collisions([a, b])
a, b = resolve_contact(contact, [a, b])
show("a", a)
show("b", b)

print("\nCollision along w only (same 3D spot, different w):")
a = RigidBody4(pose=Pose4(Vec4(0, 0, 0, 0)), linear_velocity=Vec4(0, 0, 0, 1),
               collider=SphereCollider(1.0), restitution=1.0)
b = RigidBody4(pose=Pose4(Vec4(0, 0, 0, 1.8)), collider=SphereCollider(1.0),
               restitution=1.0)
(contact,) = detect_collisions([a, b])
n = contact.normal
print(f"  contact normal ({n.x:+.0f}, {n.y:+.0f}, {n.z:+.0f}, {n.w:+.0f}), "
      f"depth {contact.depth:.2f}")

print("\nDropping a hypersphere onto the ground (1.5 simulated seconds):")
ground = RigidBody4(
    pose=Pose4(),
    collider=HalfSpaceCollider(
        Hyperplane(Pose4(rotation=rotation_with_w_axis(Vec4(0, 1, 0, 0))))),
    restitution=0.6, kinematic=True)
ball = RigidBody4(pose=Pose4(Vec4(0, 3, 0, 0)), collider=SphereCollider(0.5),
                  restitution=0.6)
bodies = [ball, ground]
for step in range(180):
    bodies, contacts = step_world(bodies, dt=FIXED_DT)
    if step % 30 == 29:
        show(f"t={FIXED_DT * (step + 1):.2f}s", bodies[0])
print("  (the ball bounces with restitution 0.6 and never drifts in w)")
