import numpy as np

from wearclass.borchiz import borchiz
from wearclass.preprocess import process_insert
from wearclass.shapefeat import shapefeat_from_mask

# a square insert seen from above, with a bright wear band on each edge
image = np.full((320, 320), 10, dtype=np.uint8)
image[60:260, 60:260] = 190
image[60:68, 110:210] = 255      # north, uniform flank wear
image[140:230, 250:260] = 255    # east, wide band
image[252:260, 150:170] = 255    # south, short notch
image[100:180, 60:66] = 255      # west

for edge in process_insert(image):
    if not edge.mask.any():
        print(f"{edge.crop.side}: no wear found")
        continue
    features = shapefeat_from_mask(edge.mask)
    contour = borchiz(edge.mask)
    print(f"{edge.crop.side} ({edge.completeness}): area {features.filled_area:.0f} px, "
          f"r {features.r:.3f}, B-ORCHIZ length {len(contour)}")
