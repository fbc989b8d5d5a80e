@problemName bad
@dimensions 2
@equalLength true
@classLabel true a
@data
1,2,3:4,5:a
